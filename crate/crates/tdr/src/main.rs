fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    if let Err(error) = tdr::cli::run_from_args(std::env::args_os()) {
        let message = error.to_string();
        if !message.is_empty() {
            eprintln!("error: {message}");
        }
        std::process::exit(error.exit_code());
    }
}
