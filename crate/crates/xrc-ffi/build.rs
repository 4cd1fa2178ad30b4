fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("XRC_H".to_string()),
        cpp_compat: true,
        documentation: true,
        ..Default::default()
    };
    match cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
    {
        Ok(bindings) => {
            bindings.write_to_file(format!("{crate_dir}/include/xrc.h"));
        }
        Err(e) => {
            // Header regeneration is best-effort; a stale header is better
            // than a broken build when cbindgen cannot parse mid-edit code.
            println!("cargo:warning=skipping header generation: {e}");
        }
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
}
