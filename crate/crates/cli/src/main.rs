fn main() {
    let args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    std::process::exit(gcnsbm_cli::cli::main_with(args));
}
