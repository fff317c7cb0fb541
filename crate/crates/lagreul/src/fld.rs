//! FLD1 field dumps: one JSON header line, then raw little-endian 64-bit
//! floats in row-major node order, components outermost.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FieldKind};
use crate::grid::Grid;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    d: usize,
    n: usize,
    l: f64,
    components: usize,
    symmetric: bool,
    name: String,
}

pub fn write_fld<W: Write>(mut w: W, f: &Field, name: &str) -> Result<()> {
    let grid = f.grid();
    let symmetric = matches!(f.kind(), FieldKind::Tensor { symmetric: true });
    let header = Header {
        format: "FLD1".to_string(),
        d: grid.d(),
        n: grid.n(),
        l: grid.l(),
        components: f.ncomp(),
        symmetric,
        name: name.to_string(),
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for v in f.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_fld<R: BufRead>(mut r: R) -> Result<(Field, String)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim())?;
    if header.format != "FLD1" {
        return Err(Error::Manifest(format!(
            "unsupported field format {:?}",
            header.format
        )));
    }
    let grid = Grid::new(header.d, header.n, header.l)?;
    let kind = match header.components {
        1 => FieldKind::Scalar,
        c if c == header.d => FieldKind::Vector,
        c if c == header.d * header.d => FieldKind::Tensor {
            symmetric: header.symmetric,
        },
        c => {
            return Err(Error::Manifest(format!(
                "component count {c} does not match d = {}",
                header.d
            )))
        }
    };
    let mut f = Field::zeros(grid, kind);
    let mut buf = [0u8; 8];
    for v in f.data_mut() {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    Ok((f, header.name))
}

pub fn write_fld_file(path: &std::path::Path, f: &Field, name: &str) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_fld(std::io::BufWriter::new(file), f, name)
}

pub fn read_fld_file(path: &std::path::Path) -> Result<(Field, String)> {
    let file = std::fs::File::open(path)?;
    read_fld(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_bits_and_metadata() {
        let g = Grid::new(2, 16, 3.5).unwrap();
        let f = Field::from_fn(g, FieldKind::Tensor { symmetric: true }, |c, x| {
            (x[0] * 1.7 - x[1]).sin() + c as f64
        });
        let mut buf = Vec::new();
        write_fld(&mut buf, &f, "stress").unwrap();
        let (back, name) = read_fld(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(name, "stress");
        assert_eq!(back.grid(), g);
        assert_eq!(back.kind(), f.kind());
        assert_eq!(back.data(), f.data());
    }
}
