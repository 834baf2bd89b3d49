//! Model checkpoints: a JSON header line, then one `entity_key<TAB>v1..vk`
//! row per entity. Values are written with 17 significant digits, which
//! round-trips every `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LatentMatrix;
use crate::error::{Error, Result};
use crate::store::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub k: usize,
    pub lambda: f64,
    pub eta: f64,
    pub epochs: usize,
    pub seed: u64,
}

pub fn write_checkpoint<W: Write>(
    mut out: W,
    header: &CheckpointHeader,
    phi: &LatentMatrix,
    registry: &Registry,
) -> std::io::Result<()> {
    writeln!(out, "{}", serde_json::to_string(header).map_err(std::io::Error::other)?)?;
    for id in registry.ids() {
        write!(out, "{}", registry.qualified_key(id))?;
        for x in phi.vector(id) {
            write!(out, "\t{x:.16e}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}

pub fn save_checkpoint(path: &Path, header: &CheckpointHeader, phi: &LatentMatrix, registry: &Registry) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(BufWriter::new(file), header, phi, registry).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint<R: BufRead>(input: R, registry: &Registry, path: &Path) -> Result<(CheckpointHeader, LatentMatrix)> {
    let mut lines = input.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty checkpoint"))?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header: CheckpointHeader =
        serde_json::from_str(&first).map_err(|e| Error::parse(path, 1, format!("bad header: {e}")))?;

    let mut phi = LatentMatrix::zeros(header.k, registry.len());
    let mut seen = vec![false; registry.len()];
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let mut cols = line.split('\t');
        let key = cols.next().unwrap_or_default();
        let id = registry
            .resolve_qualified(key)
            .ok_or_else(|| Error::parse(path, lineno, format!("unknown entity {key:?}")))?;
        let values: Vec<f64> = cols
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if values.len() != header.k {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {} values, found {}", header.k, values.len()),
            ));
        }
        phi.set_vector(id, &values)?;
        seen[id.index()] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let key = registry.qualified_key(crate::store::EntityId(missing as u32));
        return Err(Error::parse(path, 0, format!("no vector for entity {key}")));
    }
    Ok((header, phi))
}

pub fn load_checkpoint(path: &Path, registry: &Registry) -> Result<(CheckpointHeader, LatentMatrix)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file), registry, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::EntityKind;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn checkpoint_round_trips_bit_exactly(values in proptest::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 6)) {
            let mut reg = Registry::new();
            let a = reg.register(EntityKind::User, "u1");
            let b = reg.register(EntityKind::Business, "b1");
            let mut phi = LatentMatrix::zeros(3, 2);
            phi.set_vector(a, &values[..3]).unwrap();
            phi.set_vector(b, &values[3..]).unwrap();
            let header = CheckpointHeader { k: 3, lambda: 0.1, eta: 0.02, epochs: 200, seed: 9 };
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, &header, &phi, &reg).unwrap();
            let (h2, phi2) = read_checkpoint(buf.as_slice(), &reg, Path::new("mem")).unwrap();
            prop_assert_eq!(h2, header);
            for (x, y) in phi.as_slice().iter().zip(phi2.as_slice()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn missing_entity_is_rejected() {
        let mut reg = Registry::new();
        reg.register(EntityKind::User, "u1");
        reg.register(EntityKind::User, "u2");
        let text = "{\"k\":1,\"lambda\":0.1,\"eta\":0.02,\"epochs\":1,\"seed\":0}\nuser/u1\t1.0\n";
        assert!(read_checkpoint(text.as_bytes(), &reg, Path::new("mem")).is_err());
    }
}
