//! Bit-exact, dependency-free readers and writers for the on-disk formats:
//! binary PGM (P5) for grayscale images and PCM 16-bit WAV for audio.

pub mod pgm;
pub mod wav;
