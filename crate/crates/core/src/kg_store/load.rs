//! Edge-table ingestion and the `PFKG1` snapshot format.

use super::{Graph, GraphBuilder, GraphError, InverseMode};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

pub const SNAPSHOT_MAGIC: &str = "PFKG1";

const COLUMNS: [&str; 12] = [
    "relation",
    "display_relation",
    "x_index",
    "x_id",
    "x_type",
    "x_name",
    "x_source",
    "y_index",
    "y_id",
    "y_type",
    "y_name",
    "y_source",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub inverse: InverseMode,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { delimiter: b',', inverse: InverseMode::default() }
    }
}

impl LoadOptions {
    pub fn tab_separated(mut self) -> Self {
        self.delimiter = b'\t';
        self
    }

    pub fn with_inverse(mut self, inverse: InverseMode) -> Self {
        self.inverse = inverse;
        self
    }
}

/// Loads an edge table or a `PFKG1` snapshot (detected by its first line).
pub fn load_graph(path: &Path, options: &LoadOptions) -> Result<Graph, GraphError> {
    let file = std::fs::File::open(path).map_err(|source| GraphError::Io { path: path.to_path_buf(), source })?;
    load_graph_from_reader(file, options)
}

pub fn load_graph_from_reader<R: Read>(reader: R, options: &LoadOptions) -> Result<Graph, GraphError> {
    let mut reader = BufReader::new(reader);
    let head = reader.fill_buf().map_err(|e| GraphError::Csv { line: 1, message: e.to_string() })?;
    if head.starts_with(SNAPSHOT_MAGIC.as_bytes()) {
        return read_snapshot(reader);
    }
    if head.iter().all(u8::is_ascii_whitespace) {
        // Zero-length input: nothing to load, not a schema problem.
        return Ok(Graph::empty(options.inverse));
    }
    read_edge_table(reader, options)
}

fn read_edge_table<R: Read>(reader: R, options: &LoadOptions) -> Result<Graph, GraphError> {
    let mut csv = csv::ReaderBuilder::new().delimiter(options.delimiter).flexible(true).from_reader(reader);
    let headers = csv.headers().map_err(|e| GraphError::Csv { line: 1, message: e.to_string() })?.clone();
    let mut col = [0usize; 12];
    for (slot, name) in col.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| GraphError::MissingColumn { column: name.to_string() })?;
    }
    let [c_rel, c_disp, c_xi, c_xid, c_xt, c_xn, c_xs, c_yi, c_yid, c_yt, c_yn, c_ys] = col;

    let mut builder = GraphBuilder::new(options.inverse);
    let mut record = csv::StringRecord::new();
    loop {
        match csv.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(GraphError::Csv { line, message: e.to_string() });
            }
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != headers.len() {
            return Err(GraphError::MalformedRow { line, expected: headers.len(), found: record.len() });
        }
        let x_key = &record[c_xi];
        let y_key = &record[c_yi];
        for (key, name) in [(x_key, &record[c_xn]), (y_key, &record[c_yn])] {
            if name.trim().is_empty() && !builder.has_node(key) {
                return Err(GraphError::EmptyName { line, key: key.to_string() });
            }
        }
        let head = builder.node(x_key, &record[c_xt], &record[c_xn], &record[c_xs], &record[c_xid]);
        let tail = builder.node(y_key, &record[c_yt], &record[c_yn], &record[c_ys], &record[c_yid]);
        let rel = builder.relation(&record[c_rel], &record[c_disp])?;
        builder.edge(head, rel, tail);
    }
    Ok(builder.build())
}

/// Writes the stored forward edges as an edge table with the standard columns.
pub fn write_edge_table<W: Write>(graph: &Graph, writer: W, delimiter: u8) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    w.write_record(COLUMNS)?;
    for e in graph.edges().iter().filter(|e| e.inverse_of.is_none()) {
        let x = &graph.nodes()[e.head.index()];
        let y = &graph.nodes()[e.tail.index()];
        w.write_record([
            graph.relation_label(e.relation),
            graph.relation_display(e.relation),
            &x.key,
            &x.source_id,
            &x.node_type,
            &x.name,
            &x.source,
            &y.key,
            &y.source_id,
            &y.node_type,
            &y.name,
            &y.source,
        ])?;
    }
    w.flush()
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    inverse_mode: InverseMode,
    node_types: Vec<String>,
    relations: Vec<SnapshotRelation>,
    nodes: Vec<SnapshotNode>,
    edges: Vec<(u32, u32, u32)>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotRelation {
    label: String,
    display: String,
}

#[derive(Serialize, Deserialize)]
struct SnapshotNode {
    key: String,
    node_type: String,
    name: String,
    #[serde(default)]
    aliases: BTreeSet<String>,
    source: String,
    source_id: String,
}

/// Writes `PFKG1\n` followed by a JSON document holding nodes, relation
/// labels and forward edges. Inverse edges are re-derived on load.
pub fn write_snapshot<W: Write>(graph: &Graph, mut writer: W) -> std::io::Result<()> {
    let forward: Vec<_> = graph.edges().iter().filter(|e| e.inverse_of.is_none()).collect();
    let forward_rel_count = (0..graph.relation_count() as u32)
        .take_while(|&r| graph.forward_of(super::RelId(r)).is_none())
        .count();
    let snapshot = Snapshot {
        inverse_mode: graph.inverse_mode(),
        node_types: graph.node_types().iter().cloned().collect(),
        relations: (0..forward_rel_count as u32)
            .map(|r| {
                let r = super::RelId(r);
                SnapshotRelation {
                    label: graph.relation_label(r).to_string(),
                    display: graph.relation_display(r).to_string(),
                }
            })
            .collect(),
        nodes: graph
            .nodes()
            .iter()
            .map(|n| SnapshotNode {
                key: n.key.clone(),
                node_type: n.node_type.clone(),
                name: n.name.clone(),
                aliases: n.aliases.clone(),
                source: n.source.clone(),
                source_id: n.source_id.clone(),
            })
            .collect(),
        edges: forward.iter().map(|e| (e.head.0, e.relation.0, e.tail.0)).collect(),
    };
    writeln!(writer, "{SNAPSHOT_MAGIC}")?;
    serde_json::to_writer(&mut writer, &snapshot)?;
    writeln!(writer)?;
    writer.flush()
}

fn read_snapshot<R: BufRead>(mut reader: R) -> Result<Graph, GraphError> {
    let mut magic = String::new();
    reader.read_line(&mut magic).map_err(|e| GraphError::Snapshot(e.to_string()))?;
    if magic.trim_end() != SNAPSHOT_MAGIC {
        return Err(GraphError::Snapshot(format!("unsupported snapshot version `{}`", magic.trim_end())));
    }
    let snap: Snapshot = serde_json::from_reader(reader).map_err(|e| GraphError::Snapshot(e.to_string()))?;
    let types: BTreeSet<&str> = snap.node_types.iter().map(String::as_str).collect();
    let mut b = GraphBuilder::new(snap.inverse_mode);
    for n in &snap.nodes {
        if !types.contains(n.node_type.as_str()) {
            return Err(GraphError::Snapshot(format!("node `{}` has undeclared type `{}`", n.key, n.node_type)));
        }
        let id = b.node(&n.key, &n.node_type, &n.name, &n.source, &n.source_id);
        b.set_aliases(id, n.aliases.clone());
    }
    let mut rels = Vec::with_capacity(snap.relations.len());
    for r in &snap.relations {
        rels.push(b.relation(&r.label, &r.display)?);
    }
    let node_count = snap.nodes.len() as u32;
    for &(h, r, t) in &snap.edges {
        if h >= node_count || t >= node_count || r as usize >= rels.len() {
            return Err(GraphError::Snapshot(format!("edge ({h}, {r}, {t}) references unknown ids")));
        }
        b.edge(super::NodeId(h), rels[r as usize], super::NodeId(t));
    }
    Ok(b.build())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "relation,display_relation,x_index,x_id,x_type,x_name,x_source,y_index,y_id,y_type,y_name,y_source\n";

    fn load(text: &str) -> Result<Graph, GraphError> {
        load_graph_from_reader(text.as_bytes(), &LoadOptions::default())
    }

    #[test]
    fn header_only_is_empty_graph() {
        let g = load(HEADER).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (0, 0));
        let g = load("").unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (0, 0));
    }

    #[test]
    fn duplicate_rows_are_stored_once() {
        let row = "indication,indication,1,D1,drug,A,DB,2,M1,disease,B,MONDO\n";
        let g = load(&format!("{HEADER}{row}{row}{row}")).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.node_count(), 2);
    }

    #[test]
    fn missing_column_is_named() {
        let err = load("relation,x_index\n").unwrap_err();
        match err {
            GraphError::MissingColumn { column } => assert_eq!(column, "display_relation"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let text = format!("{HEADER}indication,indication,1,D1,drug,A,DB,2,M1,disease,B,MONDO\nindication,oops\n");
        match load(&text).unwrap_err() {
            GraphError::MalformedRow { line, expected, found } => assert_eq!((line, expected, found), (3, 12, 2)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn tab_delimiter() {
        let text = format!(
            "{}indication\tindication\t1\tD1\tdrug\tA\tDB\t2\tM1\tdisease\tB\tMONDO\n",
            HEADER.replace(',', "\t")
        );
        let g = load_graph_from_reader(text.as_bytes(), &LoadOptions::default().tab_separated()).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn first_occurrence_metadata_wins() {
        let text = format!(
            "{HEADER}r,r,1,D1,drug,First,DB,2,M1,disease,B,MONDO\nr,r,1,D1,drug,Second,DB,3,M2,disease,C,MONDO\n"
        );
        let g = load(&text).unwrap();
        assert_eq!(g.name(g.node_by_key("1").unwrap()), "First");
    }

    #[test]
    fn snapshot_round_trip() {
        let text = format!(
            "{HEADER}r,rel r,1,D1,drug,A,DB,2,M1,disease,B,MONDO\ns,rel s,2,M1,disease,B,MONDO,3,G,gene/protein,C,NCBI\n"
        );
        for mode in [InverseMode::Directed, InverseMode::Virtual, InverseMode::Materialized] {
            let g = load_graph_from_reader(text.as_bytes(), &LoadOptions::default().with_inverse(mode)).unwrap();
            let mut buf = Vec::new();
            write_snapshot(&g, &mut buf).unwrap();
            assert!(buf.starts_with(b"PFKG1\n"));
            let back = load_graph_from_reader(buf.as_slice(), &LoadOptions::default()).unwrap();
            assert_eq!(back.stats(), g.stats());
            assert_eq!(back.named_triples(), g.named_triples());
            assert_eq!(back.inverse_mode(), mode);
        }
    }

    #[test]
    fn bad_snapshot_version() {
        let err = load_graph_from_reader("PFKG1x\n{}".as_bytes(), &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, GraphError::Snapshot(_)));
    }
}
