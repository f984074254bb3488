//! Road network, all-pairs shortest-path skims and graph CSV I/O.
//!
//! Travel times are free-flow: each directed edge costs `length / speed`
//! seconds. The skim stores, for every ordered node pair, the minimal travel
//! time and the length of the path realizing it. Among equal-time paths the
//! shorter one wins, so the stored distance is well defined.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = u32;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} row {row}: {message}")]
    Parse { file: String, row: usize, message: String },
    #[error("{file} row {row}: {message}")]
    Validation { file: String, row: usize, message: String },
    #[error("graph is not strongly connected: node {node} {direction} node {root}")]
    Disconnected {
        node: NodeId,
        root: NodeId,
        direction: &'static str,
    },
    #[error("grid needs at least 2 rows and 2 columns, got {rows}x{cols}")]
    Dimension { rows: usize, cols: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub node_id: NodeId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    #[serde(rename = "length_m")]
    pub length: f64,
    #[serde(rename = "speed_mps")]
    pub speed: f64,
}

impl Edge {
    pub fn travel_time(&self) -> f64 {
        self.length / self.speed
    }
}

/// A validated, strongly connected directed road graph.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    /// Outgoing edge indices per node, in edge-list order.
    adjacency: Vec<Vec<usize>>,
}

impl RoadNetwork {
    /// Builds and validates a network. Nodes may be given in any order but
    /// their ids must be exactly `0..n`.
    pub fn new(mut nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        let n = nodes.len();
        if n == 0 {
            return Err(GraphError::Invalid("graph has no nodes".into()));
        }
        let mut seen = vec![false; n];
        for (row, node) in nodes.iter().enumerate() {
            let id = node.node_id as usize;
            if id >= n {
                return Err(GraphError::Validation {
                    file: "nodes".into(),
                    row: row + 1,
                    message: format!("node id {id} outside dense range [0, {n})"),
                });
            }
            if seen[id] {
                return Err(GraphError::Validation {
                    file: "nodes".into(),
                    row: row + 1,
                    message: format!("duplicate node id {id}"),
                });
            }
            seen[id] = true;
        }
        nodes.sort_by_key(|node| node.node_id);

        let mut adjacency = vec![Vec::new(); n];
        for (row, edge) in edges.iter().enumerate() {
            let bad = |message: String| GraphError::Validation {
                file: "edges".into(),
                row: row + 1,
                message,
            };
            for end in [edge.from, edge.to] {
                if end as usize >= n {
                    return Err(bad(format!("edge references unknown node {end}")));
                }
            }
            if !(edge.length > 0.0 && edge.length.is_finite()) {
                return Err(bad(format!("length must be positive, got {}", edge.length)));
            }
            if !(edge.speed > 0.0 && edge.speed.is_finite()) {
                return Err(bad(format!("speed must be positive, got {}", edge.speed)));
            }
            adjacency[edge.from as usize].push(row);
        }

        let net = Self {
            nodes,
            edges,
            adjacency,
        };
        net.check_strongly_connected()?;
        Ok(net)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, node: NodeId) -> impl Iterator<Item = &Edge> {
        self.adjacency[node as usize].iter().map(|&e| &self.edges[e])
    }

    pub fn contains(&self, node: NodeId) -> bool {
        (node as usize) < self.nodes.len()
    }

    /// Forward and backward BFS from node 0; any node missed by either is
    /// reported.
    fn check_strongly_connected(&self) -> Result<(), GraphError> {
        let n = self.n_nodes();
        let mut reverse = vec![Vec::new(); n];
        for edge in &self.edges {
            reverse[edge.to as usize].push(edge.from as usize);
        }
        let forward: Vec<Vec<usize>> = self
            .adjacency
            .iter()
            .map(|out| out.iter().map(|&e| self.edges[e].to as usize).collect())
            .collect();
        for (adj, direction) in [(&forward, "is unreachable from"), (&reverse, "cannot reach")] {
            let reached = bfs(adj, 0);
            if let Some(node) = reached.iter().position(|r| !r) {
                return Err(GraphError::Disconnected {
                    node: node as NodeId,
                    root: 0,
                    direction,
                });
            }
        }
        Ok(())
    }
}

fn bfs(adj: &[Vec<usize>], root: usize) -> Vec<bool> {
    let mut reached = vec![false; adj.len()];
    let mut queue = VecDeque::from([root]);
    reached[root] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !reached[v] {
                reached[v] = true;
                queue.push_back(v);
            }
        }
    }
    reached
}

/// Manhattan grid with bidirectional edges between 4-neighbours. Node
/// `(r, c)` gets id `r * cols + c` and sits at `(c * spacing, r * spacing)`.
pub fn grid_city(rows: usize, cols: usize, spacing: f64, speed: f64) -> Result<RoadNetwork, GraphError> {
    if rows < 2 || cols < 2 {
        return Err(GraphError::Dimension { rows, cols });
    }
    if !(spacing > 0.0 && speed > 0.0) {
        return Err(GraphError::Invalid(format!(
            "spacing and speed must be positive, got {spacing} and {speed}"
        )));
    }
    let id = |r: usize, c: usize| (r * cols + c) as NodeId;
    let nodes = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| Node {
            node_id: id(r, c),
            x: c as f64 * spacing,
            y: r as f64 * spacing,
        })
        .collect();
    let mut edges = Vec::with_capacity(4 * rows * cols);
    let mut link = |a: NodeId, b: NodeId| {
        for (from, to) in [(a, b), (b, a)] {
            edges.push(Edge {
                from,
                to,
                length: spacing,
                speed,
            });
        }
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                link(id(r, c), id(r, c + 1));
            }
            if r + 1 < rows {
                link(id(r, c), id(r + 1, c));
            }
        }
    }
    RoadNetwork::new(nodes, edges)
}

/// Dense all-pairs travel time (s) and distance (m) lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct SkimMatrix {
    n: usize,
    travel_time: Vec<f64>,
    distance: Vec<f64>,
}

impl SkimMatrix {
    pub fn n_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn travel_time(&self, from: NodeId, to: NodeId) -> f64 {
        self.travel_time[from as usize * self.n + to as usize]
    }

    #[inline]
    pub fn distance(&self, from: NodeId, to: NodeId) -> f64 {
        self.distance[from as usize * self.n + to as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Label {
    time: f64,
    distance: f64,
    node: usize,
}

impl Eq for Label {}

impl Ord for Label {
    // reversed: BinaryHeap pops the smallest (time, distance, node)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.distance.total_cmp(&self.distance))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One Dijkstra per source over the lexicographic (time, distance) cost.
pub fn build_skim(net: &RoadNetwork) -> SkimMatrix {
    let n = net.n_nodes();
    let mut travel_time = vec![f64::INFINITY; n * n];
    let mut distance = vec![f64::INFINITY; n * n];
    let mut heap = BinaryHeap::new();
    let mut done = vec![false; n];
    for source in 0..n {
        let row = source * n;
        done.iter_mut().for_each(|d| *d = false);
        travel_time[row + source] = 0.0;
        distance[row + source] = 0.0;
        heap.push(Label {
            time: 0.0,
            distance: 0.0,
            node: source,
        });
        while let Some(Label {
            time,
            distance: dist,
            node,
        }) = heap.pop()
        {
            if done[node] {
                continue;
            }
            done[node] = true;
            for edge in net.out_edges(node as NodeId) {
                let next = edge.to as usize;
                if done[next] {
                    continue;
                }
                let t = time + edge.travel_time();
                let d = dist + edge.length;
                let best_t = travel_time[row + next];
                let best_d = distance[row + next];
                if t < best_t || (t == best_t && d < best_d) {
                    travel_time[row + next] = t;
                    distance[row + next] = d;
                    heap.push(Label {
                        time: t,
                        distance: d,
                        node: next,
                    });
                }
            }
        }
    }
    SkimMatrix {
        n,
        travel_time,
        distance,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GraphError + '_ {
    move |source| GraphError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, expected_header: &[&str]) -> Result<Vec<T>, GraphError> {
    let file_name = path.display().to_string();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| GraphError::Parse {
        file: file_name.clone(),
        row: 0,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != expected_header {
        return Err(GraphError::Parse {
            file: file_name,
            row: 0,
            message: format!("expected header `{}`", expected_header.join(",")),
        });
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| GraphError::Parse {
                file: file_name.clone(),
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Reads `nodes.csv` and `edges.csv` and validates the result.
pub fn load_graph(nodes_path: &Path, edges_path: &Path) -> Result<RoadNetwork, GraphError> {
    let nodes: Vec<Node> = read_rows(nodes_path, &["node_id", "x", "y"])?;
    let edges: Vec<Edge> = read_rows(edges_path, &["from", "to", "length_m", "speed_mps"])?;
    RoadNetwork::new(nodes, edges).map_err(|e| match e {
        GraphError::Validation { file, row, message } => GraphError::Validation {
            file: if file == "nodes" {
                nodes_path.display().to_string()
            } else {
                edges_path.display().to_string()
            },
            row,
            message,
        },
        other => other,
    })
}

/// Loads `nodes.csv` and `edges.csv` from one directory.
pub fn load_graph_dir(dir: &Path) -> Result<RoadNetwork, GraphError> {
    load_graph(&dir.join("nodes.csv"), &dir.join("edges.csv"))
}

/// `nodes.csv` and `edges.csv` contents.
pub fn graph_to_csv(net: &RoadNetwork) -> (String, String) {
    let mut nodes = String::from("node_id,x,y\n");
    for node in &net.nodes {
        nodes.push_str(&format!("{},{},{}\n", node.node_id, node.x, node.y));
    }
    let mut edges = String::from("from,to,length_m,speed_mps\n");
    for edge in &net.edges {
        edges.push_str(&format!("{},{},{},{}\n", edge.from, edge.to, edge.length, edge.speed));
    }
    (nodes, edges)
}

/// Writes `nodes.csv` and `edges.csv` into `dir`.
pub fn write_graph(net: &RoadNetwork, dir: &Path) -> Result<(), GraphError> {
    let (nodes, edges) = graph_to_csv(net);
    for (name, text) in [("nodes.csv", nodes), ("edges.csv", edges)] {
        let path = dir.join(name);
        let mut out = File::create(&path).map_err(io_err(&path))?;
        out.write_all(text.as_bytes()).map_err(io_err(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: NodeId) -> Node {
        Node {
            node_id: id,
            x: id as f64,
            y: 0.0,
        }
    }

    fn edge(from: NodeId, to: NodeId, length: f64, speed: f64) -> Edge {
        Edge {
            from,
            to,
            length,
            speed,
        }
    }

    #[test]
    fn grid_counts() {
        let net = grid_city(2, 2, 100.0, 10.0).unwrap();
        assert_eq!(net.n_nodes(), 4);
        assert_eq!(net.edges().len(), 8);
    }

    #[test]
    fn grid_corner_to_corner() {
        let skim = build_skim(&grid_city(3, 3, 100.0, 10.0).unwrap());
        assert_eq!(skim.travel_time(0, 8), 40.0);
        assert_eq!(skim.distance(0, 8), 400.0);
    }

    #[test]
    fn grid_rejects_single_row() {
        assert!(matches!(
            grid_city(1, 5, 100.0, 10.0),
            Err(GraphError::Dimension { rows: 1, cols: 5 })
        ));
    }

    #[test]
    fn line_graph_skim() {
        // A -> B -> C plus return edges so the graph is strongly connected
        let net = RoadNetwork::new(
            vec![node(0), node(1), node(2)],
            vec![
                edge(0, 1, 100.0, 10.0),
                edge(1, 2, 200.0, 10.0),
                edge(2, 0, 1000.0, 10.0),
            ],
        )
        .unwrap();
        let skim = build_skim(&net);
        assert_eq!(skim.travel_time(0, 2), 30.0);
        assert_eq!(skim.distance(0, 2), 300.0);
        for u in 0..3 {
            assert_eq!(skim.travel_time(u, u), 0.0);
            assert_eq!(skim.distance(u, u), 0.0);
        }
    }

    #[test]
    fn equal_time_prefers_shorter_path() {
        // 0->1 direct: 200 m at 20 m/s (10 s). 0->2->1: 50 m at 10 m/s twice (10 s).
        let net = RoadNetwork::new(
            vec![node(0), node(1), node(2)],
            vec![
                edge(0, 1, 200.0, 20.0),
                edge(0, 2, 50.0, 10.0),
                edge(2, 1, 50.0, 10.0),
                edge(1, 0, 10.0, 1.0),
                edge(2, 0, 10.0, 1.0),
            ],
        )
        .unwrap();
        let skim = build_skim(&net);
        assert_eq!(skim.travel_time(0, 1), 10.0);
        assert_eq!(skim.distance(0, 1), 100.0);
    }

    #[test]
    fn dangling_edge_rejected() {
        let err = RoadNetwork::new(vec![node(0), node(1), node(2)], vec![edge(0, 99, 1.0, 1.0)]).unwrap_err();
        assert!(err.to_string().contains("99"), "{err}");
    }

    #[test]
    fn non_positive_length_rejected() {
        let err = RoadNetwork::new(vec![node(0), node(1)], vec![edge(0, 1, 0.0, 1.0)]).unwrap_err();
        assert!(matches!(err, GraphError::Validation { row: 1, .. }));
    }

    #[test]
    fn unreachable_node_named() {
        // 0 <-> 1 <-> 2 strongly connected, 3 only has an outgoing edge
        let net = RoadNetwork::new(
            vec![node(0), node(1), node(2), node(3)],
            vec![
                edge(0, 1, 1.0, 1.0),
                edge(1, 0, 1.0, 1.0),
                edge(1, 2, 1.0, 1.0),
                edge(2, 1, 1.0, 1.0),
                edge(3, 0, 1.0, 1.0),
            ],
        );
        match net {
            Err(GraphError::Disconnected { node, .. }) => assert_eq!(node, 3),
            other => panic!("expected disconnected error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_node_rejected() {
        assert!(RoadNetwork::new(vec![node(0), node(0)], vec![]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let net = grid_city(3, 4, 150.0, 12.5).unwrap();
        write_graph(&net, dir.path()).unwrap();
        let back = load_graph_dir(dir.path()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn csv_two_node_graph() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("nodes.csv"), "node_id,x,y\n0,0,0\n1,100,0\n").unwrap();
        std::fs::write(
            dir.path().join("edges.csv"),
            "from,to,length_m,speed_mps\n0,1,100,10\n1,0,100,10\n",
        )
        .unwrap();
        assert_eq!(load_graph_dir(dir.path()).unwrap().n_nodes(), 2);
    }

    #[test]
    fn csv_malformed_row_named() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("nodes.csv"), "node_id,x,y\n0,0,0\n1,abc,0\n").unwrap();
        std::fs::write(dir.path().join("edges.csv"), "from,to,length_m,speed_mps\n").unwrap();
        let err = load_graph_dir(dir.path()).unwrap_err();
        assert!(matches!(err, GraphError::Parse { row: 2, .. }), "{err}");
    }

    #[test]
    fn csv_dangling_reference_names_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("nodes.csv"), "node_id,x,y\n0,0,0\n1,0,0\n2,0,0\n").unwrap();
        std::fs::write(
            dir.path().join("edges.csv"),
            "from,to,length_m,speed_mps\n0,1,1,1\n1,99,1,1\n",
        )
        .unwrap();
        let err = load_graph_dir(dir.path()).unwrap_err().to_string();
        assert!(err.contains("edges.csv row 2") && err.contains("99"), "{err}");
    }
}
