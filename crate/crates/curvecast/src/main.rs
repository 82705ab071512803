fn main() {
    // Die quietly on a closed pipe (`curvecast ... | head`) like other
    // line-oriented tools instead of panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(curvecast::cli::run());
}
