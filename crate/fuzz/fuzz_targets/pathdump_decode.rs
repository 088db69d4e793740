#![no_main]

use formkac::pathdump::{read_path, write_path};
use libfuzzer_sys::fuzz_target;

// Arbitrary bytes must never panic the decoder, and anything it accepts
// must re-encode and decode to the same states.
fuzz_target!(|data: &[u8]| {
    if let Ok(path) = read_path(data) {
        let bytes = write_path(&path);
        let back = read_path(&bytes).expect("re-encoded dump must decode");
        assert_eq!(back.states.len(), path.states.len());
        for (a, b) in path.states.iter().zip(back.states.iter()) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.ltime, b.ltime);
        }
    }
});
