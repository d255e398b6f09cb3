fn main() {
    std::process::exit(gpsurrogate::run(std::env::args_os()));
}
