fn main() {
    std::process::exit(nilm::run(std::env::args_os()));
}
