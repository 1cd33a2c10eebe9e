//! Binary PGM (P5) and PPM (P6) images with maxval 255, read into and
//! written from `(1, C, H, W)` tensors holding values in `[0, 255]`.

use super::DataError;
use crate::mining::FeatureTensor;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Reads a binary P5/P6 image as a `(1, 1|3, H, W)` tensor.
pub fn read_pnm(path: &Path) -> Result<FeatureTensor, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    let fail = |message: String, offset: u64| DataError::Binary {
        path: path.display().to_string(),
        message,
        offset,
    };

    if bytes.len() < 2 {
        return Err(fail("file too short for a PNM header".into(), 0));
    }
    let channels = match &bytes[0..2] {
        b"P5" => 1usize,
        b"P6" => 3usize,
        other => {
            return Err(fail(
                format!("bad magic {:?}, expected \"P5\" or \"P6\"", String::from_utf8_lossy(other)),
                0,
            ))
        }
    };

    // header tokens separated by whitespace; `#` starts a comment to EOL
    let mut pos = 2usize;
    let next_token = |pos: &mut usize| -> Result<u64, DataError> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
            *pos += 1;
        }
        if *pos == start {
            return Err(fail(
                "expected a decimal header token".into(),
                start as u64,
            ));
        }
        std::str::from_utf8(&bytes[start..*pos])
            .unwrap()
            .parse::<u64>()
            .map_err(|e| fail(format!("bad header token: {e}"), start as u64))
    };

    let width = next_token(&mut pos)? as usize;
    let height = next_token(&mut pos)? as usize;
    let maxval = next_token(&mut pos)?;
    if maxval != 255 {
        return Err(fail(format!("maxval must be 255, got {maxval}"), pos as u64));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(fail("expected single whitespace after maxval".into(), pos as u64));
    }
    pos += 1;

    let expected = width * height * channels;
    let actual = bytes.len() - pos;
    if actual != expected {
        return Err(fail(
            format!("payload length mismatch: expected {expected} bytes, got {actual}"),
            pos as u64,
        ));
    }
    let mut img = FeatureTensor::zeros(1, channels, height, width);
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels {
                let v = bytes[pos + (y * width + x) * channels + c];
                img.set(0, c, y, x, f64::from(v));
            }
        }
    }
    Ok(img)
}

/// Writes a `(1, 1|3, H, W)` tensor as P5/P6, rounding and clamping values
/// to `[0, 255]`.
pub fn write_pnm(path: &Path, img: &FeatureTensor) -> Result<(), DataError> {
    let (n, c, h, w) = img.dims();
    if n != 1 || (c != 1 && c != 3) {
        return Err(DataError::Binary {
            path: path.display().to_string(),
            message: format!("tensor must be (1, 1|3, H, W), got ({n}, {c}, {h}, {w})"),
            offset: 0,
        });
    }
    let magic = if c == 1 { "P5" } else { "P6" };
    let mut buf = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let v = img.get(0, ch, y, x).round().clamp(0.0, 255.0);
                buf.push(v as u8);
            }
        }
    }
    let mut file = fs::File::create(path).map_err(|e| DataError::io(path, e))?;
    file.write_all(&buf).map_err(|e| DataError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_written_ppm_fixture() {
        // 2x2 P6: header (11 bytes "P6\n2 2\n255\n") + 12 payload bytes
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.ppm");
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[
            255, 0, 0, /**/ 0, 255, 0, //
            0, 0, 255, /**/ 7, 13, 200,
        ]);
        fs::write(&path, &bytes).unwrap();
        let img = read_pnm(&path).unwrap();
        assert_eq!(img.dims(), (1, 3, 2, 2));
        assert_eq!(img.get(0, 0, 0, 0), 255.0);
        assert_eq!(img.get(0, 1, 0, 1), 255.0);
        assert_eq!(img.get(0, 2, 1, 0), 255.0);
        assert_eq!(
            (img.get(0, 0, 1, 1), img.get(0, 1, 1, 1), img.get(0, 2, 1, 1)),
            (7.0, 13.0, 200.0)
        );
    }

    #[test]
    fn pgm_round_trip_with_comment_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.pgm");
        let mut bytes = b"P5\n# synthetic\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 64, 128, 192, 255, 10]);
        fs::write(&path, &bytes).unwrap();
        let img = read_pnm(&path).unwrap();
        assert_eq!(img.dims(), (1, 1, 2, 3));
        assert_eq!(img.get(0, 0, 1, 2), 10.0);

        let out = dir.path().join("out.pgm");
        write_pnm(&out, &img).unwrap();
        let again = read_pnm(&out).unwrap();
        assert_eq!(again, img);
    }

    #[test]
    fn truncated_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        fs::write(&path, b"P5\n4 4\n255\n\x00\x01").unwrap();
        let err = read_pnm(&path).unwrap_err().to_string();
        assert!(err.contains("expected 16 bytes, got 2"), "{err}");
    }

    #[test]
    fn wrong_maxval_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        fs::write(&path, b"P5\n1 1\n65535\n\x00\x00").unwrap();
        assert!(read_pnm(&path).is_err());
    }
}
