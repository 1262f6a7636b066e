use std::io;

fn main() {
    let code = heckfair_cli::run(
        std::env::args_os(),
        &heckfair::Kernels::default(),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    std::process::exit(code);
}
