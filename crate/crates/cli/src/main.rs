fn main() {
    std::process::exit(gbt_trust::run(std::env::args_os()));
}
