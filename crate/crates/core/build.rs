fn main() {
    // BLAS/LAPACK come from the system OpenBLAS.
    println!("cargo:rustc-link-lib=openblas");
}
