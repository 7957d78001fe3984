fn main() {
    // LAPACK comes from the system OpenBLAS.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
