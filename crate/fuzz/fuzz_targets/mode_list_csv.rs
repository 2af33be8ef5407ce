#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = decoctl::io::read_mode_list(data, Some(0.05));
});
