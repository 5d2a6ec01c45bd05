//! NASTRAN bulk-data subset: GRID, CTETRA (4- and 10-node) and PSOLID in
//! small-field fixed or free-field format.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use super::{Element, Mesh, MeshError, Node};
use crate::scalar::Real;

/// Result of a parse, including the cards that were skipped.
#[derive(Clone, Debug)]
pub struct ParseOutput<T> {
    pub mesh: Mesh<T>,
    /// Unsupported card name → number of occurrences.
    pub skipped: BTreeMap<String, usize>,
}

impl<T> ParseOutput<T> {
    pub fn skipped_total(&self) -> usize {
        self.skipped.values().sum()
    }
}

/// Parses bulk data, logging a warning for skipped cards.
pub fn parse_nastran<T: Real>(text: &str) -> Result<Mesh<T>, MeshError> {
    let out = NastranReader::new().parse(text)?;
    if out.skipped_total() > 0 {
        log::warn!(
            "skipped {} unsupported card(s): {:?}",
            out.skipped_total(),
            out.skipped
        );
    }
    Ok(out.mesh)
}

/// A logical card: name, data fields (field 2 onward) and the source line.
struct Card {
    name: String,
    fields: Vec<String>,
    line: usize,
    image: String,
}

#[derive(Debug, Default)]
pub struct NastranReader {
    _priv: (),
}

impl NastranReader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse<T: Real>(&self, text: &str) -> Result<ParseOutput<T>, MeshError> {
        let (cards, annotations) = split_cards(text)?;

        let mut nodes: Vec<Node<T>> = Vec::new();
        let mut node_line: HashMap<u64, usize> = HashMap::new();
        let mut elements: Vec<Element> = Vec::new();
        let mut element_ids: HashSet<u64> = HashSet::new();
        let mut midside: HashSet<u64> = HashSet::new();
        let mut pids: BTreeMap<u32, String> = BTreeMap::new();
        let mut skipped: BTreeMap<String, usize> = BTreeMap::new();

        for card in &cards {
            match card.name.as_str() {
                "GRID" => {
                    let id = card.int(0, "ID")?;
                    let cp = card.opt_int(1)?.unwrap_or(0);
                    if cp != 0 {
                        return Err(MeshError::CoordinateSystem {
                            line: card.line,
                            node: id,
                            cp,
                        });
                    }
                    let pos = [
                        T::of(card.real(2, "X1")?),
                        T::of(card.real(3, "X2")?),
                        T::of(card.real(4, "X3")?),
                    ];
                    if node_line.insert(id, card.line).is_some() {
                        return Err(card.malformed(format!("duplicate GRID id {id}")));
                    }
                    nodes.push(Node { id, pos });
                }
                "CTETRA" => {
                    let id = card.int(0, "EID")?;
                    let pid = card.int(1, "PID")?;
                    let pid = u32::try_from(pid)
                        .map_err(|_| card.malformed(format!("PID {pid} out of range")))?;
                    let mut corners = [0u64; 4];
                    for (k, slot) in corners.iter_mut().enumerate() {
                        *slot = card.int(2 + k, "G")?;
                    }
                    for k in 6..card.fields.len().min(12) {
                        if let Some(g) = card.opt_int(k)? {
                            midside.insert(g as u64);
                        }
                    }
                    if card.fields.len() > 12 && card.fields[12..].iter().any(|f| !f.is_empty()) {
                        return Err(card.malformed("more than 10 grid points".into()));
                    }
                    if !element_ids.insert(id) {
                        return Err(card.malformed(format!("duplicate CTETRA id {id}")));
                    }
                    pids.entry(pid).or_insert_with(|| pid.to_string());
                    elements.push(Element {
                        id,
                        nodes: corners,
                        region: pid,
                    });
                }
                "PSOLID" => {
                    let pid = card.int(0, "PID")?;
                    let pid = u32::try_from(pid)
                        .map_err(|_| card.malformed(format!("PID {pid} out of range")))?;
                    pids.entry(pid).or_insert_with(|| pid.to_string());
                }
                other => *skipped.entry(other.to_string()).or_default() += 1,
            }
        }

        for (pid, name) in annotations {
            if let Some(slot) = pids.get_mut(&pid) {
                *slot = name;
            }
        }

        let corner: HashSet<u64> = elements.iter().flat_map(|e| e.nodes).collect();
        for e in &elements {
            for &g in &e.nodes {
                if !node_line.contains_key(&g) {
                    return Err(MeshError::MissingGrid {
                        element: e.id,
                        node: g,
                    });
                }
            }
        }
        if !midside.is_empty() {
            nodes.retain(|n| corner.contains(&n.id) || !midside.contains(&n.id));
        }

        Ok(ParseOutput {
            mesh: Mesh::new(nodes, elements, pids),
            skipped,
        })
    }
}

type Annotations = Vec<(u32, String)>;

/// Groups physical lines into logical cards and collects `$REGION` comments.
fn split_cards(text: &str) -> Result<(Vec<Card>, Annotations), MeshError> {
    let has_begin = text.lines().any(|l| {
        l.trim_start()
            .to_ascii_uppercase()
            .starts_with("BEGIN BULK")
    });
    let mut in_bulk = !has_begin;
    let mut cards: Vec<Card> = Vec::new();
    let mut annotations = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let raw = raw.trim_end_matches('\r');
        if let Some(comment) = raw.trim_start().strip_prefix('$') {
            if let Some(rest) = comment.trim_start().strip_prefix("REGION") {
                let mut it = rest.trim().splitn(2, char::is_whitespace);
                let pid = it.next().and_then(|s| s.parse::<u32>().ok());
                let name = it.next().map(str::trim).filter(|s| !s.is_empty());
                match (pid, name) {
                    (Some(pid), Some(name)) => annotations.push((pid, name.to_string())),
                    _ => {
                        return Err(MeshError::Malformed {
                            line: line_no,
                            card: "$REGION".into(),
                            reason: "expected `$REGION <pid> <name>`".into(),
                            image: raw.to_string(),
                        })
                    }
                }
            }
            continue;
        }
        let body = match raw.find('$') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if body.trim().is_empty() {
            continue;
        }
        let upper = body.trim().to_ascii_uppercase();
        if !in_bulk {
            if upper.starts_with("BEGIN BULK") {
                in_bulk = true;
            }
            continue;
        }
        if upper.starts_with("BEGIN BULK") {
            continue;
        }
        if upper.starts_with("ENDDATA") {
            break;
        }

        let free = body.contains(',');
        let (head, data) = if free {
            let parts: Vec<&str> = body.split(',').map(str::trim).collect();
            let data: Vec<String> = parts[1..parts.len().min(9)]
                .iter()
                .map(|s| s.to_string())
                .collect();
            (parts[0].to_string(), data)
        } else {
            let cols = fixed_columns(body);
            (
                cols[0].trim().to_string(),
                cols[1..9].iter().map(|s| s.trim().to_string()).collect(),
            )
        };

        let continuation = head.starts_with('+') || head.is_empty();
        if continuation {
            let Some(last) = cards.last_mut() else {
                return Err(MeshError::Malformed {
                    line: line_no,
                    card: "continuation".into(),
                    reason: "continuation line without a parent card".into(),
                    image: raw.to_string(),
                });
            };
            last.fields
                .resize(last.fields.len().div_ceil(8).max(1) * 8, String::new());
            last.fields.extend(data);
            last.image.push('\n');
            last.image.push_str(raw);
            continue;
        }

        let name = head.to_ascii_uppercase();
        if name.ends_with('*') {
            return Err(MeshError::Malformed {
                line: line_no,
                card: name,
                reason: "large-field format is not supported".into(),
                image: raw.to_string(),
            });
        }
        cards.push(Card {
            name,
            fields: data,
            line: line_no,
            image: raw.to_string(),
        });
    }
    for c in &mut cards {
        while c.fields.last().is_some_and(|f| f.is_empty()) {
            c.fields.pop();
        }
    }
    Ok((cards, annotations))
}

/// Splits a small-field line into ten 8-character columns.
fn fixed_columns(line: &str) -> Vec<String> {
    let chars: Vec<char> = line.chars().collect();
    (0..10)
        .map(|k| {
            let lo = (k * 8).min(chars.len());
            let hi = ((k + 1) * 8).min(chars.len());
            chars[lo..hi].iter().collect()
        })
        .collect()
}

impl Card {
    fn malformed(&self, reason: String) -> MeshError {
        MeshError::Malformed {
            line: self.line,
            card: self.name.clone(),
            reason,
            image: self.image.clone(),
        }
    }

    fn field(&self, k: usize) -> &str {
        self.fields.get(k).map(String::as_str).unwrap_or("")
    }

    fn opt_int(&self, k: usize) -> Result<Option<i64>, MeshError> {
        let s = self.field(k);
        if s.is_empty() {
            return Ok(None);
        }
        s.parse::<i64>()
            .map(Some)
            .map_err(|_| self.malformed(format!("field {} ({s:?}) is not an integer", k + 2)))
    }

    fn int(&self, k: usize, what: &str) -> Result<u64, MeshError> {
        match self.opt_int(k)? {
            Some(v) if v > 0 => Ok(v as u64),
            Some(v) => Err(self.malformed(format!("{what} must be positive, got {v}"))),
            None => Err(self.malformed(format!("missing {what} (field {})", k + 2))),
        }
    }

    fn real(&self, k: usize, what: &str) -> Result<f64, MeshError> {
        let s = self.field(k);
        if s.is_empty() {
            return Ok(0.0);
        }
        parse_real(s).ok_or_else(|| self.malformed(format!("{what} ({s:?}) is not a real number")))
    }
}

/// Reads a NASTRAN real, including the implicit-exponent forms `1.5-3` and
/// `2.+4` and `D` exponents.
pub(crate) fn parse_real(s: &str) -> Option<f64> {
    let mut t = s.trim().to_ascii_uppercase().replace('D', "E");
    if !t.contains('E') {
        if let Some(p) = t[1..].rfind(['+', '-']) {
            t.insert(p + 1, 'E');
        }
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Free-field writer. Region names are preserved through `$REGION`
/// annotations.
pub fn write_nastran<T: Real>(m: &Mesh<T>) -> String {
    let mut s = String::with_capacity(64 * (m.node_count() + m.element_count()));
    s.push_str("$ tetrahedral volume mesh, coordinates in mm\n");
    s.push_str("BEGIN BULK\n");
    for (pid, name) in m.region_names() {
        if name != &pid.to_string() {
            let _ = writeln!(s, "$REGION {pid} {name}");
        }
        let _ = writeln!(s, "PSOLID,{pid},{pid}");
    }
    for n in m.nodes() {
        let _ = writeln!(
            s,
            "GRID,{},,{:?},{:?},{:?}",
            n.id,
            n.pos[0].as_f64(),
            n.pos[1].as_f64(),
            n.pos[2].as_f64()
        );
    }
    for e in m.elements() {
        let [a, b, c, d] = e.nodes;
        let _ = writeln!(s, "CTETRA,{},{},{a},{b},{c},{d}", e.id, e.region);
    }
    s.push_str("ENDDATA\n");
    s
}

/// Reads a sidecar region map `{"7": "Skin", ...}`.
pub fn read_region_map(json: &str) -> Result<BTreeMap<u32, String>, MeshError> {
    let raw: BTreeMap<String, String> =
        serde_json::from_str(json).map_err(|e| MeshError::RegionMap(e.to_string()))?;
    raw.into_iter()
        .map(|(k, v)| {
            k.trim()
                .parse::<u32>()
                .map(|id| (id, v))
                .map_err(|_| MeshError::RegionMap(format!("key {k:?} is not a PID")))
        })
        .collect()
}
