use std::path::Path;

const DEFAULT_LAPACK_DIR: &str = "/usr/lib/x86_64-linux-gnu/lapack";
const DEFAULT_BLAS_DIR: &str = "/usr/lib/x86_64-linux-gnu/blas";

fn main() {
    println!("cargo:rerun-if-env-changed=QUENCH_LAPACK_DIR");
    println!("cargo:rerun-if-env-changed=QUENCH_BLAS_DIR");
    let lapack = std::env::var("QUENCH_LAPACK_DIR").unwrap_or_else(|_| DEFAULT_LAPACK_DIR.into());
    let blas = std::env::var("QUENCH_BLAS_DIR").unwrap_or_else(|_| DEFAULT_BLAS_DIR.into());
    // lapack-sys only declares the symbols. Prefer the static reference
    // archives: some optimized BLAS builds pick broken kernels at runtime.
    if Path::new(&lapack).join("liblapack.a").exists() && Path::new(&blas).join("libblas.a").exists() {
        println!("cargo:rustc-link-search=native={lapack}");
        println!("cargo:rustc-link-search=native={blas}");
        println!("cargo:rustc-link-lib=static=lapack");
        println!("cargo:rustc-link-lib=static=blas");
        println!("cargo:rustc-link-lib=dylib=gfortran");
    } else {
        println!("cargo:rustc-link-lib=lapack");
    }
}
