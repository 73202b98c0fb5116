use std::path::Path;

fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("cargo sets CARGO_MANIFEST_DIR");
    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("HYPERSENSE_H".into()),
        cpp_compat: true,
        documentation: true,
        header: Some(
            "/* C interface for the hypersense tuning-sensitivity library.\n\
             * Generated from the Rust sources; do not edit by hand. */"
                .into(),
        ),
        ..Default::default()
    };
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("generating the C header")
        .write_to_file(Path::new(&crate_dir).join("include").join("hypersense.h"));
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=build.rs");
}
