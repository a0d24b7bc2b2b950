#![no_main]

use std::io::Cursor;

use foa_spatial::foa_signal::{read_wav_from, write_wav_to, WavEncoding};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(signal) = read_wav_from(Cursor::new(data)) else {
        return;
    };
    // float output is lossless for anything we accepted
    let mut out = Cursor::new(Vec::new());
    write_wav_to(&mut out, &signal, WavEncoding::Float32).unwrap();
    let back = read_wav_from(Cursor::new(out.into_inner())).unwrap();
    assert_eq!(back.len(), signal.len());
    assert_eq!(back.sample_rate(), signal.sample_rate());
});
