use std::path::Path;

const REFERENCE_DIR: &str = "/usr/lib/x86_64-linux-gnu";

fn main() {
    println!("cargo:rerun-if-env-changed=PERTURBKIT_LAPACK_LIB");
    if let Ok(libs) = std::env::var("PERTURBKIT_LAPACK_LIB") {
        for lib in libs.split(',').filter(|l| !l.is_empty()) {
            println!("cargo:rustc-link-lib={lib}");
        }
        return;
    }
    let lapack = Path::new(REFERENCE_DIR).join("lapack");
    let blas = Path::new(REFERENCE_DIR).join("blas");
    if lapack.join("liblapack.a").exists() && blas.join("libblas.a").exists() {
        println!("cargo:rustc-link-search=native={}", lapack.display());
        println!("cargo:rustc-link-search=native={}", blas.display());
        println!("cargo:rustc-link-lib=static=lapack");
        println!("cargo:rustc-link-lib=static=blas");
        println!("cargo:rustc-link-lib=gfortran");
    } else {
        println!("cargo:rustc-link-lib=lapack");
        println!("cargo:rustc-link-lib=blas");
    }
}
