fn main() {
    // System LAPACK provides zgeev/zgesv/zgesvd; BLAS comes in through
    // liblapack's own dynamic dependencies.
    println!("cargo:rustc-link-lib=dylib=lapack");
}
