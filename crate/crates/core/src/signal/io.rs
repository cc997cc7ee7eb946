//! Epoch serialization: a small binary container plus CSV for debugging.
//!
//! Container layout (little-endian):
//!
//! ```text
//! magic   4 bytes  "EEGE"
//! version u16      currently 1
//! n_chan  u16
//! n_samp  u32
//! rate    f32
//! label   u8       0 = non-error, 1 = error, 2 = unknown
//! body    f32 * n_chan * n_samp, row-major (channel rows)
//! ```

use std::io::{Read, Write};

use ndarray::Array2;

use super::{EegEpoch, Label};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"EEGE";
const VERSION: u16 = 1;

/// Writes the binary container. `onset_step` is not part of the container;
/// it is a runtime alignment detail.
pub fn write_epoch<W: Write>(epoch: &EegEpoch, mut w: W) -> Result<()> {
    let n_ch = epoch.n_channels();
    let n_samp = epoch.n_samples();
    if n_ch > u16::MAX as usize || n_samp > u32::MAX as usize {
        return Err(Error::Format("epoch too large for container".into()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(n_ch as u16).to_le_bytes())?;
    w.write_all(&(n_samp as u32).to_le_bytes())?;
    w.write_all(&(epoch.rate as f32).to_le_bytes())?;
    w.write_all(&[epoch.true_label.code()])?;
    for &v in epoch.data.iter() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Reads the binary container.
pub fn read_epoch<R: Read>(mut r: R) -> Result<EegEpoch> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad epoch magic".into()));
    }
    let mut buf2 = [0u8; 2];
    r.read_exact(&mut buf2)?;
    let version = u16::from_le_bytes(buf2);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported epoch version {version}")));
    }
    r.read_exact(&mut buf2)?;
    let n_ch = u16::from_le_bytes(buf2) as usize;
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let n_samp = u32::from_le_bytes(buf4) as usize;
    r.read_exact(&mut buf4)?;
    let rate = f32::from_le_bytes(buf4) as f64;
    let mut label = [0u8; 1];
    r.read_exact(&mut label)?;
    let mut data = Array2::<f64>::zeros((n_ch, n_samp));
    for v in data.iter_mut() {
        r.read_exact(&mut buf4)?;
        *v = f32::from_le_bytes(buf4) as f64;
    }
    Ok(EegEpoch {
        data,
        rate,
        onset_step: 0,
        true_label: Label::from_code(label[0])?,
    })
}

/// CSV dump, one row per channel.
pub fn write_epoch_csv<W: Write>(epoch: &EegEpoch, mut w: W) -> Result<()> {
    for row in epoch.data.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::signal::{default_subjects, generate_epoch};

    #[test]
    fn container_round_trip() {
        let mut rng = stream(5, &["io"]);
        let e = generate_epoch(&default_subjects()[2], Label::Error, 7, &mut rng);
        let mut buf = Vec::new();
        write_epoch(&e, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"EEGE");
        let back = read_epoch(buf.as_slice()).unwrap();
        assert_eq!(back.n_channels(), 32);
        assert_eq!(back.n_samples(), 2000);
        assert_eq!(back.true_label, Label::Error);
        assert_eq!(back.rate, 1000.0);
        // f32 body: values match to f32 precision.
        for (a, b) in e.data.iter().zip(back.data.iter()) {
            assert!((a - b).abs() <= (*a as f32).abs() as f64 * 1e-6 + 1e-6);
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"NOPE\x01\x00".to_vec();
        assert!(read_epoch(buf.as_slice()).is_err());
    }

    #[test]
    fn csv_has_one_row_per_channel() {
        let mut rng = stream(5, &["io"]);
        let e = generate_epoch(&default_subjects()[0], Label::NonError, 0, &mut rng);
        let mut buf = Vec::new();
        write_epoch_csv(&e, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 32);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 2000);
    }
}
