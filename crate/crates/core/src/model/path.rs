use std::fmt;

use serde::{Serialize, Serializer};

/// One step from a node to a child. Conditional nodes expose their branch
/// probability reference as an extra terminal under [`Segment::Prob`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Segment {
    Child(u32),
    Prob,
}

/// Address of a node in a journey tree, rendered as `$`, `$.1`, `$.1.p`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodePath(Vec<Segment>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn child(&self, index: usize) -> Self {
        let mut segs = self.0.clone();
        segs.push(Segment::Child(index as u32));
        NodePath(segs)
    }

    pub fn prob(&self) -> Self {
        let mut segs = self.0.clone();
        segs.push(Segment::Prob);
        NodePath(segs)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_ancestor_of(&self, other: &NodePath) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn parse(text: &str) -> Option<NodePath> {
        let mut parts = text.split('.');
        if parts.next()? != "$" {
            return None;
        }
        let mut segs = Vec::new();
        for part in parts {
            if part == "p" {
                segs.push(Segment::Prob);
            } else {
                segs.push(Segment::Child(part.parse().ok()?));
            }
        }
        Some(NodePath(segs))
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("$")?;
        for seg in &self.0 {
            match seg {
                Segment::Child(i) => write!(f, ".{i}")?,
                Segment::Prob => f.write_str(".p")?,
            }
        }
        Ok(())
    }
}

impl Serialize for NodePath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_and_parse_agree() {
        let path = NodePath::root().child(1).prob();
        assert_eq!(path.to_string(), "$.1.p");
        assert_eq!(NodePath::parse("$.1.p"), Some(path));
        assert_eq!(NodePath::parse("$"), Some(NodePath::root()));
        assert_eq!(NodePath::parse("x.1"), None);
    }

    #[test]
    fn ordering_is_preorder_friendly() {
        let root = NodePath::root();
        let mut paths = vec![root.child(2), root.child(0).child(1), root.clone(), root.child(0)];
        paths.sort();
        let rendered: Vec<_> = paths.iter().map(ToString::to_string).collect();
        assert_eq!(rendered, ["$", "$.0", "$.0.1", "$.2"]);
        assert!(root.is_ancestor_of(&root.child(3)));
        assert!(!root.child(1).is_ancestor_of(&root.child(2)));
    }
}
