use tracing_subscriber::EnvFilter;

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("RIVERECHO_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let code = riverecho_cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
