#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // The decoder must never panic on arbitrary bytes. Anything it accepts is
    // a valid instruction set, so re-encoding it must succeed too.
    if let Ok(set) = mref_core::wire::decode(data) {
        let doc = mref_core::wire::encode(&set).expect("decoded sets re-encode");
        mref_core::wire::decode(doc.as_bytes()).expect("canonical bytes decode");
    }
});
