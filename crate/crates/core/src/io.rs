//! Tree and sequence files.
//!
//! Sequences are newline-delimited `node_id<TAB>level<TAB>bits` records with
//! bits written as ASCII `0`/`1`. Edge maps go to a sidecar file of
//! `child_id<TAB>parent_pos<TAB>child_pos` records, with `†` for a deleted
//! site. A single JSON document holding both is the alternative format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{EvolvedTree, SiteMap};
use crate::tree::{NodeId, TreeShape};

pub const DAGGER: &str = "†";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: NodeId,
    pub level: usize,
    #[serde(with = "bit_string")]
    pub bits: Vec<u8>,
}

mod bit_string {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bits: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::bits_to_string(bits))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_bits(&s).ok_or_else(|| D::Error::custom("bit string must contain only 0 and 1"))
    }
}

pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

pub fn parse_bits(s: &str) -> Option<Vec<u8>> {
    s.bytes()
        .map(|c| match c {
            b'0' => Some(0),
            b'1' => Some(1),
            _ => None,
        })
        .collect()
}

pub fn tree_records(tree: &EvolvedTree) -> Vec<NodeRecord> {
    let shape = tree.shape();
    tree.sequences
        .iter()
        .enumerate()
        .map(|(v, s)| NodeRecord {
            node: v,
            level: shape.level_of(v),
            bits: s.bits.clone(),
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(f).lines().enumerate().map(|(i, l)| (i + 1, l)))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: Option<&str>) -> Result<T> {
    let raw = raw.ok_or_else(|| parse_err(path, line, format!("missing {name}")))?;
    raw.parse()
        .map_err(|_| parse_err(path, line, format!("bad {name}: {raw:?}")))
}

pub fn write_sequences(path: &Path, records: &[NodeRecord]) -> Result<()> {
    let mut w = create(path)?;
    for r in records {
        writeln!(w, "{}\t{}\t{}", r.node, r.level, bits_to_string(&r.bits)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads sequence records; blank lines are skipped.
pub fn read_sequences(path: &Path) -> Result<Vec<NodeRecord>> {
    let mut out = Vec::new();
    for (n, line) in lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let node = field(path, n, "node id", cols.next())?;
        let level = field(path, n, "level", cols.next())?;
        let raw = cols.next().unwrap_or("");
        let bits = parse_bits(raw).ok_or_else(|| parse_err(path, n, "bits must be ASCII 0/1"))?;
        if cols.next().is_some() {
            return Err(parse_err(path, n, "expected three tab-separated fields"));
        }
        out.push(NodeRecord { node, level, bits });
    }
    Ok(out)
}

pub fn write_maps(path: &Path, tree: &EvolvedTree) -> Result<()> {
    let mut w = create(path)?;
    for (child, edge) in tree.edges.iter().enumerate() {
        let Some(edge) = edge else { continue };
        for (p, q) in edge.map.0.iter().enumerate() {
            let r = match q {
                Some(q) => writeln!(w, "{child}\t{p}\t{q}"),
                None => writeln!(w, "{child}\t{p}\t{DAGGER}"),
            };
            r.map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a sidecar map file into `(child, map)` pairs in file order. Parent
/// positions of one child must be listed as `0, 1, 2, ...`.
pub fn read_maps(path: &Path) -> Result<Vec<(NodeId, SiteMap)>> {
    let mut out: Vec<(NodeId, SiteMap)> = Vec::new();
    for (n, line) in lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let child: NodeId = field(path, n, "child id", cols.next())?;
        let p: usize = field(path, n, "parent position", cols.next())?;
        let q = match cols.next() {
            Some(DAGGER) => None,
            raw => Some(field(path, n, "child position", raw)?),
        };
        if out.last().is_none_or(|(c, _)| *c != child) {
            out.push((child, SiteMap::default()));
        }
        let map = &mut out.last_mut().unwrap().1;
        if p != map.len() {
            return Err(parse_err(path, n, format!("expected parent position {}, got {p}", map.len())));
        }
        map.0.push(q);
    }
    Ok(out)
}

/// The JSON variant: shape, sequences and maps in one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub d: usize,
    pub height: usize,
    pub nodes: Vec<NodeRecord>,
    #[serde(default)]
    pub maps: Vec<MapRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapRecord {
    pub child: NodeId,
    pub map: Vec<Option<usize>>,
}

impl TreeDocument {
    pub fn from_tree(tree: &EvolvedTree) -> Self {
        let shape = tree.shape();
        TreeDocument {
            d: shape.d,
            height: shape.height,
            nodes: tree_records(tree),
            maps: tree
                .edges
                .iter()
                .enumerate()
                .filter_map(|(child, e)| {
                    e.as_ref().map(|e| MapRecord {
                        child,
                        map: e.map.0.clone(),
                    })
                })
                .collect(),
        }
    }
}

/// Writes a float with 17 significant digits; for `#[serde(with = "...")]`
/// on CSV fields.
pub mod f17 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{x:.16e}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }

    pub mod option {
        use serde::{de::Error, Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(x) => s.serialize_str(&format!("{x:.16e}")),
                None => s.serialize_str(""),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            let s = String::deserialize(d)?;
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(D::Error::custom)
        }
    }
}

/// Pretty JSON with every float written to 17 significant digits;
/// non-finite floats become `null`.
struct Digits17(serde_json::ser::PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    );
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Leaf sequences in node-id order from a TSV or JSON (`.json`) file. Records
/// for internal nodes are ignored.
pub fn read_leaves(path: &Path, shape: &TreeShape) -> Result<Vec<Vec<u8>>> {
    let mut records = if is_json(path) {
        read_json::<TreeDocument>(path)?.nodes
    } else {
        read_sequences(path)?
    };
    records.retain(|r| r.level == shape.height);
    records.sort_by_key(|r| r.node);
    let ids: Vec<NodeId> = records.iter().map(|r| r.node).collect();
    if ids != shape.leaves().collect::<Vec<_>>() {
        return Err(parse_err(
            path,
            0,
            format!(
                "expected leaves {:?} of a {}-ary tree of height {}, found {} leaf records",
                shape.leaves(),
                shape.d,
                shape.height,
                ids.len()
            ),
        ));
    }
    Ok(records.into_iter().map(|r| r.bits).collect())
}

/// Writes `tree` as TSV sequences plus sidecar maps, or as one JSON document
/// when `path` ends in `.json` (the map path is then unused).
pub fn write_tree(path: &Path, map_path: Option<&Path>, tree: &EvolvedTree) -> Result<()> {
    if is_json(path) {
        return write_json(path, &TreeDocument::from_tree(tree));
    }
    write_sequences(path, &tree_records(tree))?;
    if let Some(m) = map_path {
        write_maps(m, tree)?;
    }
    Ok(())
}
