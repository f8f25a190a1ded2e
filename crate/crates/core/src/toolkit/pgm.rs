use std::path::Path;

use crate::error::{Error, Result};
use crate::observe::{Frame84, FRAME_SIZE};

/// Length of the `P5\n84 84\n255\n` header.
pub const HEADER_LEN: usize = 13;

/// Binary greymap (P5), maxval 255, intensity `round(255·p)`.
pub fn encode_pgm(frame: &Frame84) -> Vec<u8> {
    let mut out = format!("P5\n{FRAME_SIZE} {FRAME_SIZE}\n255\n").into_bytes();
    out.extend(frame.pixels().iter().map(|&p| (255.0 * p.clamp(0.0, 1.0)).round() as u8));
    out
}

pub fn write_pgm(path: &Path, frame: &Frame84) -> Result<()> {
    std::fs::write(path, encode_pgm(frame)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observe::FRAME_PIXELS;

    #[test]
    fn header_and_payload() {
        let mut f = Frame84::zeros();
        f.pixels_mut()[0] = 1.0;
        f.pixels_mut()[1] = 0.5;
        f.pixels_mut()[2] = 0.25;
        let bytes = encode_pgm(&f);
        assert_eq!(&bytes[..HEADER_LEN], b"P5\n84 84\n255\n");
        assert_eq!(bytes.len(), HEADER_LEN + FRAME_PIXELS);
        // 127.5 rounds away from zero, 63.75 up
        assert_eq!(&bytes[HEADER_LEN..HEADER_LEN + 4], &[255, 128, 64, 0]);
    }
}
