#![no_main]

use foa_spatial::vector_quantizer::{decode_tokens, encode_tokens};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    match decode_tokens(data) {
        Ok(t) => assert_eq!(encode_tokens(&t).unwrap(), data),
        Err(_) => assert!(data.len() % 2 == 1),
    }
});
