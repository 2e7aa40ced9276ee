#![no_main]

use libfuzzer_sys::fuzz_target;
use mref_core::authoring;
use mref_core::instructions::AssetRef;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let target = AssetRef::new("fuzz_target_asset").expect("static id is valid");
    let _ = authoring::compile_csv(text, "fuzz", target);
});
