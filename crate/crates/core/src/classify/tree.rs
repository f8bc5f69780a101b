use serde::{Deserialize, Serialize};

/// Tree node; children are indices into the owning tree's node list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        column: u32,
        /// Rows with `value < threshold` go left.
        threshold: f64,
        /// Direction of rows whose value is NaN.
        missing_left: bool,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

/// A regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub(crate) fn from_nodes(nodes: Vec<Node>) -> Self {
        debug_assert!(!nodes.is_empty());
        Self { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    column,
                    threshold,
                    missing_left,
                    left,
                    right,
                } => {
                    let x = row[*column as usize];
                    let go_left = if x.is_nan() { *missing_left } else { x < *threshold };
                    at = if go_left { *left } else { *right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Split columns in node order.
    pub fn split_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { column, .. } => Some(*column as usize),
            Node::Leaf { .. } => None,
        })
    }

    /// Indented text form; `names` maps column indices to display names.
    pub fn dump(&self, names: &[String]) -> String {
        let mut out = String::new();
        self.dump_node(0, 0, names, &mut out);
        out
    }

    fn dump_node(&self, at: usize, indent: usize, names: &[String], out: &mut String) {
        let pad = "  ".repeat(indent);
        match &self.nodes[at] {
            Node::Leaf { value } => out.push_str(&format!("{pad}{at}:leaf={value:?}\n")),
            Node::Split {
                column,
                threshold,
                missing_left,
                left,
                right,
            } => {
                let name = names.get(*column as usize).map_or("?", String::as_str);
                let missing = if *missing_left { left } else { right };
                out.push_str(&format!(
                    "{pad}{at}:[{name} < {threshold:?}] yes={left},no={right},missing={missing}\n"
                ));
                self.dump_node(*left as usize, indent + 1, names, out);
                self.dump_node(*right as usize, indent + 1, names, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> DecisionTree {
        DecisionTree::from_nodes(vec![
            Node::Split {
                column: 1,
                threshold: 0.5,
                missing_left: false,
                left: 1,
                right: 2,
            },
            Node::Leaf { value: -1.0 },
            Node::Leaf { value: 2.0 },
        ])
    }

    #[test]
    fn routing() {
        let t = stump();
        assert_eq!(t.predict(&[9.0, 0.4]), -1.0);
        assert_eq!(t.predict(&[9.0, 0.5]), 2.0);
        assert_eq!(t.predict(&[9.0, f64::NAN]), 2.0);
        assert_eq!(t.depth(), 1);
        assert_eq!(DecisionTree::leaf(0.0).depth(), 0);
    }

    #[test]
    fn dump_names_columns() {
        let text = stump().dump(&["a".into(), "[1][SA]".into()]);
        assert!(text.starts_with("0:[[1][SA] < 0.5] yes=1,no=2,missing=2"), "{text}");
        assert!(text.contains("  2:leaf=2.0"));
    }

    #[test]
    fn json_round_trip() {
        let t = stump();
        let back: DecisionTree = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
