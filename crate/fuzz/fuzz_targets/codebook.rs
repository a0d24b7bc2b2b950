#![no_main]

use foa_spatial::vector_quantizer::Codebook;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cb) = Codebook::from_bytes(data) {
        assert_eq!(cb.to_bytes(), data);
        let _ = cb.decode(&[0]);
    }
});
