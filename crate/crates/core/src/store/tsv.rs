//! Tab-separated file formats.
//!
//! Relations file: header `relation first_key second_key value`, then one row
//! per triple. R rows carry raw stars (1-5); BC and UC rows carry +1/-1. Lines
//! starting with `#` are comments. Binary R labels are written back as 5 (+1)
//! and 1 (-1), which binarize to the same labels.
//!
//! Ground-truth file: header `entity_key v1 .. vk`, one row per entity keyed
//! by `kind/key`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{binarize_rating, Database, Registry, Relation, RelationTriple};
use crate::error::{Error, Result};
use crate::model::LatentMatrix;

pub const RELATIONS_HEADER: [&str; 4] = ["relation", "first_key", "second_key", "value"];
pub const RATINGS_HEADER: [&str; 3] = ["user_key", "business_key", "stars"];
pub const BUSINESS_CATEGORIES_HEADER: [&str; 2] = ["business_key", "category_key"];

/// Yields `(line_number, columns)` for each data row after validating the
/// header. Blank and `#` lines are skipped.
fn data_rows(path: &Path, expected_header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = i + 1;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<String> = trimmed.split('\t').map(str::to_owned).collect();
        if !header_seen {
            if cols.len() < expected_header.len()
                || !cols.iter().zip(expected_header).all(|(a, b)| a.trim() == *b)
            {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected header {:?}", expected_header.join("\t")),
                ));
            }
            header_seen = true;
            continue;
        }
        rows.push((lineno, cols));
    }
    if !header_seen {
        return Err(Error::parse(path, 0, "missing header row"));
    }
    Ok(rows)
}

fn column<'a>(path: &Path, lineno: usize, cols: &'a [String], i: usize) -> Result<&'a str> {
    cols.get(i)
        .map(|s| s.trim())
        .ok_or_else(|| Error::parse(path, lineno, format!("missing column {}", i + 1)))
}

pub fn read_relations(path: &Path) -> Result<Database> {
    let mut db = Database::new();
    for (lineno, cols) in data_rows(path, &RELATIONS_HEADER)? {
        let rel_s = column(path, lineno, &cols, 0)?;
        let relation =
            Relation::parse(rel_s).ok_or_else(|| Error::parse(path, lineno, format!("unknown relation {rel_s:?}")))?;
        let first = column(path, lineno, &cols, 1)?;
        let second = column(path, lineno, &cols, 2)?;
        let value_s = column(path, lineno, &cols, 3)?;
        let value: i64 = value_s
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad value {value_s:?}")))?;
        let label = match relation {
            Relation::R => binarize_rating(value).map_err(|e| Error::parse(path, lineno, e.to_string()))?,
            _ if value == 1 || value == -1 => value as i8,
            _ => return Err(Error::parse(path, lineno, format!("{relation} value must be +1 or -1"))),
        };
        let (k1, k2) = relation.schema();
        let a = db.register(k1, first);
        let b = db.register(k2, second);
        db.insert(RelationTriple::new(relation, a, b, label))
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
    }
    Ok(db)
}

pub fn write_relations_to<W: Write>(mut out: W, db: &Database) -> std::io::Result<()> {
    writeln!(out, "{}", RELATIONS_HEADER.join("\t"))?;
    let reg = db.registry();
    for t in db.triples() {
        let value = match (t.relation, t.label) {
            (Relation::R, 1) => 5,
            (Relation::R, _) => 1,
            (_, l) => l as i64,
        };
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            t.relation,
            reg.key(t.first),
            reg.key(t.second),
            value
        )?;
    }
    out.flush()
}

pub fn write_relations(path: &Path, db: &Database) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_relations_to(BufWriter::new(file), db).map_err(|e| Error::io(path, e))
}

pub fn write_groundtruth(path: &Path, registry: &Registry, truth: &LatentMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        write!(out, "entity_key")?;
        for j in 1..=truth.k() {
            write!(out, "\tv{j}")?;
        }
        writeln!(out)?;
        for id in registry.ids() {
            write!(out, "{}", registry.qualified_key(id))?;
            for x in truth.vector(id) {
                write!(out, "\t{x:.16e}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Reads a ground-truth file against an existing registry. Every registered
/// entity must have a row.
pub fn read_groundtruth(path: &Path, registry: &Registry) -> Result<LatentMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let k = loop {
        let Some((i, line)) = lines.next() else {
            return Err(Error::parse(path, 0, "missing header row"));
        };
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.first().map(|c| c.trim()) != Some("entity_key") || cols.len() < 2 {
            return Err(Error::parse(path, i + 1, "expected header entity_key\tv1..vk"));
        }
        break cols.len() - 1;
    };
    let mut phi = LatentMatrix::zeros(k, registry.len());
    let mut seen = vec![false; registry.len()];
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let key = cols.next().unwrap_or_default().trim();
        let Some(id) = registry.resolve_qualified(key) else {
            return Err(Error::parse(path, i + 1, format!("unknown entity {key:?}")));
        };
        let values: Vec<f64> = cols
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if values.len() != k {
            return Err(Error::parse(path, i + 1, format!("expected {k} values, found {}", values.len())));
        }
        phi.set_vector(id, &values)?;
        seen[id.index()] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let key = registry.qualified_key(super::EntityId(missing as u32));
        return Err(Error::parse(path, 0, format!("no ground-truth vector for {key}")));
    }
    Ok(phi)
}

pub fn read_ratings(path: &Path) -> Result<Vec<(String, String, i64)>> {
    data_rows(path, &RATINGS_HEADER)?
        .into_iter()
        .map(|(lineno, cols)| {
            let u = column(path, lineno, &cols, 0)?.to_owned();
            let b = column(path, lineno, &cols, 1)?.to_owned();
            let s = column(path, lineno, &cols, 2)?;
            let stars = s
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad star rating {s:?}")))?;
            Ok((u, b, stars))
        })
        .collect()
}

pub fn read_business_categories(path: &Path) -> Result<Vec<(String, String)>> {
    data_rows(path, &BUSINESS_CATEGORIES_HEADER)?
        .into_iter()
        .map(|(lineno, cols)| {
            Ok((
                column(path, lineno, &cols, 0)?.to_owned(),
                column(path, lineno, &cols, 1)?.to_owned(),
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{generate_synthetic, EntityKind, SyntheticConfig};

    #[test]
    fn relations_round_trip() {
        let cfg = SyntheticConfig {
            n_users: 4,
            n_businesses: 3,
            n_categories: 2,
            k: 2,
            ..Default::default()
        };
        let data = generate_synthetic(&cfg, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rel.tsv");
        write_relations(&path, &data.db).unwrap();
        let back = read_relations(&path).unwrap();
        assert_eq!(back.len(), data.db.len());
        for t in data.db.triples() {
            let reg = data.db.registry();
            let (k1, k2) = t.relation.schema();
            let a = back.registry().get(k1, reg.key(t.first)).unwrap();
            let b = back.registry().get(k2, reg.key(t.second)).unwrap();
            assert_eq!(back.get(t.relation, a, b).unwrap().label, t.label);
        }
    }

    #[test]
    fn relations_parse_stars_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rel.tsv");
        std::fs::write(
            &path,
            "# fixture\nrelation\tfirst_key\tsecond_key\tvalue\nR\tb1\tu1\t4\nR\tb2\tu1\t3\n# mid\nBC\tb1\tpizza\t1\nUC\tu1\tpizza\t-1\n",
        )
        .unwrap();
        let db = read_relations(&path).unwrap();
        assert_eq!(db.len(), 4);
        let reg = db.registry();
        let u1 = reg.get(EntityKind::User, "u1").unwrap();
        let b2 = reg.get(EntityKind::Business, "b2").unwrap();
        assert_eq!(db.get(Relation::R, b2, u1).unwrap().label, -1);
    }

    #[test]
    fn relations_require_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rel.tsv");
        std::fs::write(&path, "R\tb1\tu1\t4\n").unwrap();
        assert!(matches!(read_relations(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn relations_reject_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rel.tsv");
        std::fs::write(&path, "relation\tfirst_key\tsecond_key\tvalue\nR\tb1\tu1\t9\n").unwrap();
        assert!(read_relations(&path).is_err());
        std::fs::write(&path, "relation\tfirst_key\tsecond_key\tvalue\nBC\tb1\tc\t2\n").unwrap();
        assert!(read_relations(&path).is_err());
    }

    #[test]
    fn groundtruth_round_trip() {
        let cfg = SyntheticConfig {
            n_users: 3,
            n_businesses: 2,
            n_categories: 2,
            k: 4,
            ..Default::default()
        };
        let data = generate_synthetic(&cfg, 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("groundtruth.tsv");
        write_groundtruth(&path, data.db.registry(), &data.truth).unwrap();
        assert_eq!(read_groundtruth(&path, data.db.registry()).unwrap(), data.truth);
    }
}
