#![no_main]

use foa_spatial::vector_quantizer::LatentBatch;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(z) = LatentBatch::from_bytes(data) {
        assert_eq!(z.to_bytes(), data);
    }
});
