//! Ordered XML tree, the message representation every other module works on.
//!
//! The supported syntax is a deliberate subset of XML 1.0: elements,
//! attributes, text and the five predefined entities. DTDs, CDATA sections,
//! comments and processing instructions are rejected by the parser.
//! Namespace prefixes are not expanded; `wsu:Id` is one literal name.

mod c14n;
mod parse;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use c14n::{serialize_canonical, write_canonical, C14N_METHOD};
pub use parse::{is_valid_name, parse};

/// A node of the tree: an element or a run of character data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XmlNode {
    Element(Element),
    Text(String),
}

impl XmlNode {
    pub fn as_element(&self) -> Option<&Element> {
        match self {
            XmlNode::Element(e) => Some(e),
            XmlNode::Text(_) => None,
        }
    }

    pub fn as_element_mut(&mut self) -> Option<&mut Element> {
        match self {
            XmlNode::Element(e) => Some(e),
            XmlNode::Text(_) => None,
        }
    }
}

impl From<Element> for XmlNode {
    fn from(e: Element) -> Self {
        XmlNode::Element(e)
    }
}

/// An element with ordered attributes and children.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Element {
    pub name: String,
    pub attributes: Vec<(String, String)>,
    pub children: Vec<XmlNode>,
}

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Element {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.set_attr(name, value);
        self
    }

    pub fn with_child(mut self, child: impl Into<XmlNode>) -> Self {
        self.children.push(child.into());
        self
    }

    /// Appends a text child. Empty text is ignored so the tree stays canonical.
    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        let text = text.into();
        if !text.is_empty() {
            self.children.push(XmlNode::Text(text));
        }
        self
    }

    /// Name without any namespace prefix.
    pub fn local_name(&self) -> &str {
        local_part(&self.name)
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    /// First attribute whose local name matches, e.g. `role` matches `soap:role`.
    pub fn attr_local(&self, local: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|(n, _)| local_part(n) == local)
            .map(|(_, v)| v.as_str())
    }

    /// Sets or replaces an attribute, keeping names unique.
    pub fn set_attr(&mut self, name: impl Into<String>, value: impl Into<String>) {
        let name = name.into();
        let value = value.into();
        match self.attributes.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = value,
            None => self.attributes.push((name, value)),
        }
    }

    pub fn child_elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(XmlNode::as_element)
    }

    /// Number of direct element children.
    pub fn element_count(&self) -> usize {
        self.child_elements().count()
    }

    /// First direct child element with the given local name.
    pub fn child(&self, local: &str) -> Option<&Element> {
        self.child_elements().find(|e| e.local_name() == local)
    }

    /// Child index (among all children) of the first element with the given local name.
    pub fn child_index(&self, local: &str) -> Option<usize> {
        self.children
            .iter()
            .position(|c| c.as_element().is_some_and(|e| e.local_name() == local))
    }

    /// Concatenated character data of this element and its descendants.
    pub fn text_content(&self) -> String {
        let mut out = String::new();
        collect_text(self, &mut out);
        out
    }

    /// Resolves a path to an element. Paths that stop on a text node yield `None`.
    pub fn element_at(&self, path: &NodePath) -> Option<&Element> {
        let mut cur = self;
        for &i in path.indices() {
            cur = cur.children.get(i)?.as_element()?;
        }
        Some(cur)
    }

    pub fn element_at_mut(&mut self, path: &NodePath) -> Option<&mut Element> {
        let mut cur = self;
        for &i in path.indices() {
            cur = cur.children.get_mut(i)?.as_element_mut()?;
        }
        Some(cur)
    }

    /// Pre-order list of every element in the tree with its path, root first.
    pub fn elements(&self) -> Vec<(NodePath, &Element)> {
        let mut out = Vec::new();
        let mut stack = vec![(NodePath::root(), self)];
        while let Some((path, el)) = stack.pop() {
            for (i, child) in el.children.iter().enumerate().rev() {
                if let XmlNode::Element(c) = child {
                    stack.push((path.child(i), c));
                }
            }
            out.push((path, el));
        }
        out
    }

    /// Detaches and returns the node at `path`.
    pub fn remove(&mut self, path: &NodePath) -> Result<XmlNode> {
        let (parent, idx) = path.split_last().ok_or(Error::RootHasNoParent)?;
        let p = self
            .element_at_mut(&parent)
            .ok_or_else(|| Error::InvalidPath(path.to_vec()))?;
        if idx >= p.children.len() {
            return Err(Error::InvalidPath(path.to_vec()));
        }
        Ok(p.children.remove(idx))
    }

    /// Inserts `node` as child number `index` of the element at `parent`.
    pub fn insert(&mut self, parent: &NodePath, index: usize, node: XmlNode) -> Result<()> {
        let p = self
            .element_at_mut(parent)
            .ok_or_else(|| Error::InvalidPath(parent.to_vec()))?;
        if index > p.children.len() {
            return Err(Error::InvalidPath(parent.child(index).to_vec()));
        }
        p.children.insert(index, node);
        Ok(())
    }

    /// Swaps the subtrees at two paths; neither may be an ancestor of the other.
    pub fn swap(&mut self, a: &NodePath, b: &NodePath) -> Result<()> {
        if a.is_prefix_of(b) || b.is_prefix_of(a) {
            return Err(Error::InvalidPath(b.to_vec()));
        }
        let node_a = self.node_at(a)?.clone();
        let node_b = self.node_at(b)?.clone();
        *self.node_at_mut(a)? = node_b;
        *self.node_at_mut(b)? = node_a;
        Ok(())
    }

    fn node_at(&self, path: &NodePath) -> Result<&XmlNode> {
        let (parent, idx) = path.split_last().ok_or(Error::InvalidPath(vec![]))?;
        self.element_at(&parent)
            .and_then(|p| p.children.get(idx))
            .ok_or_else(|| Error::InvalidPath(path.to_vec()))
    }

    fn node_at_mut(&mut self, path: &NodePath) -> Result<&mut XmlNode> {
        let (parent, idx) = path.split_last().ok_or(Error::InvalidPath(vec![]))?;
        self.element_at_mut(&parent)
            .and_then(|p| p.children.get_mut(idx))
            .ok_or_else(|| Error::InvalidPath(path.to_vec()))
    }
}

fn collect_text(el: &Element, out: &mut String) {
    for c in &el.children {
        match c {
            XmlNode::Text(t) => out.push_str(t),
            XmlNode::Element(e) => collect_text(e, out),
        }
    }
}

/// Local part of a possibly prefixed name.
pub fn local_part(name: &str) -> &str {
    name.rsplit_once(':').map_or(name, |(_, local)| local)
}

/// Child indices from the root down to a node. The empty path is the root.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodePath(Vec<usize>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn new(indices: Vec<usize>) -> Self {
        NodePath(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.0.clone()
    }

    /// Number of steps from the root, which equals the element's depth.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, index: usize) -> NodePath {
        let mut v = self.0.clone();
        v.push(index);
        NodePath(v)
    }

    pub fn parent(&self) -> Option<NodePath> {
        self.split_last().map(|(p, _)| p)
    }

    pub fn split_last(&self) -> Option<(NodePath, usize)> {
        let (&last, rest) = self.0.split_last()?;
        Some((NodePath(rest.to_vec()), last))
    }

    /// True when `self` is `other` or one of its ancestors.
    pub fn is_prefix_of(&self, other: &NodePath) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for i in &self.0 {
            write!(f, "/{i}")?;
        }
        Ok(())
    }
}

/// The set of attribute names treated as element identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdAttributes(Vec<String>);

impl Default for IdAttributes {
    fn default() -> Self {
        IdAttributes(vec!["wsu:Id".into(), "Id".into(), "id".into()])
    }
}

impl IdAttributes {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        IdAttributes(names.into_iter().map(Into::into).collect())
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn contains(&self, attr: &str) -> bool {
        self.0.iter().any(|n| n == attr)
    }

    /// The element's identifier, taking the first configured name present.
    pub fn id_of<'a>(&self, el: &'a Element) -> Option<&'a str> {
        self.0.iter().find_map(|n| el.attr(n))
    }
}

/// The identifier of an element under the default identifier attribute set.
pub fn id_of(el: &Element) -> Option<&str> {
    IdAttributes::default().id_of(el)
}

/// Map from identifier value to the element carrying it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WsuIdIndex {
    pub entries: BTreeMap<String, NodePath>,
    pub duplicates: Vec<(String, Vec<NodePath>)>,
}

impl WsuIdIndex {
    pub fn is_unique(&self) -> bool {
        self.duplicates.is_empty()
    }
}

pub fn build_wsu_id_index(root: &Element) -> WsuIdIndex {
    build_wsu_id_index_with(root, &IdAttributes::default())
}

pub fn build_wsu_id_index_with(root: &Element, ids: &IdAttributes) -> WsuIdIndex {
    let mut seen: BTreeMap<String, Vec<NodePath>> = BTreeMap::new();
    for (path, el) in root.elements() {
        for (name, value) in &el.attributes {
            if ids.contains(name) {
                seen.entry(value.clone()).or_default().push(path.clone());
            }
        }
    }
    let mut index = WsuIdIndex::default();
    for (id, paths) in seen {
        if paths.len() == 1 {
            index.entries.insert(id, paths.into_iter().next().unwrap());
        } else {
            index.duplicates.push((id, paths));
        }
    }
    index
}

/// Strips the optional leading `#` from a same-document reference.
pub fn reference_id(uri: &str) -> &str {
    uri.strip_prefix('#').unwrap_or(uri)
}

/// Finds the element a `#id` (or bare `id`) reference points at, wherever it sits.
pub fn resolve_reference(root: &Element, uri: &str) -> Result<NodePath> {
    resolve_reference_with(root, uri, &IdAttributes::default())
}

pub fn resolve_reference_with(root: &Element, uri: &str, ids: &IdAttributes) -> Result<NodePath> {
    let id = reference_id(uri);
    let mut found: Option<NodePath> = None;
    for (path, el) in root.elements() {
        let hits = el.attributes.iter().filter(|(n, v)| ids.contains(n) && v == id).count();
        if hits == 0 {
            continue;
        }
        if found.is_some() || hits > 1 {
            return Err(Error::AmbiguousReference(id.to_string()));
        }
        found = Some(path);
    }
    found.ok_or_else(|| Error::ReferenceNotFound(id.to_string()))
}

/// Distance from the root; the root itself has depth 0.
pub fn depth_of(root: &Element, path: &NodePath) -> Result<usize> {
    root.element_at(path)
        .map(|_| path.len())
        .ok_or_else(|| Error::InvalidPath(path.to_vec()))
}

/// Path and literal name of the immediate parent element.
pub fn parent_of(root: &Element, path: &NodePath) -> Result<(NodePath, String)> {
    if root.element_at(path).is_none() {
        return Err(Error::InvalidPath(path.to_vec()));
    }
    let parent = path.parent().ok_or(Error::RootHasNoParent)?;
    let name = root
        .element_at(&parent)
        .map(|e| e.name.clone())
        .ok_or_else(|| Error::InvalidPath(parent.to_vec()))?;
    Ok((parent, name))
}

/// Smallest positive integer not yet used as an identifier value anywhere in the tree.
pub fn fresh_id(root: &Element) -> String {
    let ids = IdAttributes::default();
    let used: std::collections::HashSet<&str> = root
        .elements()
        .into_iter()
        .flat_map(|(_, el)| {
            el.attributes
                .iter()
                .filter(|(n, _)| ids.contains(n))
                .map(|(_, v)| v.as_str())
                .collect::<Vec<_>>()
        })
        .collect();
    (1u64..)
        .map(|n| n.to_string())
        .find(|s| !used.contains(s.as_str()))
        .expect("unbounded range")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loan_account() -> Element {
        parse(include_bytes!("../../fixtures/loan_account.xml")).unwrap()
    }

    fn path_of(root: &Element, local: &str) -> NodePath {
        root.elements()
            .into_iter()
            .find(|(_, e)| e.local_name() == local)
            .map(|(p, _)| p)
            .unwrap()
    }

    #[test]
    fn depth_matches_tree_levels() {
        let root = loan_account();
        assert_eq!(depth_of(&root, &NodePath::root()).unwrap(), 0);
        assert_eq!(depth_of(&root, &path_of(&root, "Security")).unwrap(), 2);
        assert_eq!(depth_of(&root, &path_of(&root, "Reference")).unwrap(), 5);
        assert!(matches!(
            depth_of(&root, &NodePath::new(vec![7, 7])),
            Err(Error::InvalidPath(_))
        ));
    }

    #[test]
    fn child_depth_is_parent_plus_one() {
        let root = loan_account();
        for (path, el) in root.elements() {
            let d = depth_of(&root, &path).unwrap();
            for (i, c) in el.children.iter().enumerate() {
                if c.as_element().is_some() {
                    assert_eq!(depth_of(&root, &path.child(i)).unwrap(), d + 1);
                }
            }
        }
    }

    #[test]
    fn id_index_of_loan_account() {
        let root = loan_account();
        let idx = build_wsu_id_index(&root);
        assert!(idx.duplicates.is_empty());
        let names: Vec<(&str, &str)> = idx
            .entries
            .iter()
            .map(|(id, p)| (id.as_str(), root.element_at(p).unwrap().local_name()))
            .collect();
        assert_eq!(names, vec![("1", "Body"), ("2", "SoapAccount"), ("3", "BST")]);
    }

    #[test]
    fn id_index_reports_duplicates() {
        let root = parse(br#"<r><a Id="1"/><b><c Id="1"/></b></r>"#).unwrap();
        let idx = build_wsu_id_index(&root);
        assert!(idx.entries.is_empty());
        assert_eq!(
            idx.duplicates,
            vec![("1".to_string(), vec![NodePath::new(vec![0]), NodePath::new(vec![1, 0])])]
        );
        assert!(matches!(
            resolve_reference(&root, "#1"),
            Err(Error::AmbiguousReference(_))
        ));
    }

    #[test]
    fn id_index_empty_without_ids() {
        let root = parse(b"<r><a/><b x=\"1\"/></r>").unwrap();
        assert_eq!(build_wsu_id_index(&root), WsuIdIndex::default());
    }

    #[test]
    fn configurable_id_attribute_set() {
        let root = parse(br#"<r><a ref="x"/><b Id="y"/></r>"#).unwrap();
        let only_ref = IdAttributes::new(["ref"]);
        let idx = build_wsu_id_index_with(&root, &only_ref);
        assert_eq!(idx.entries.keys().collect::<Vec<_>>(), vec!["x"]);
        assert!(resolve_reference_with(&root, "#y", &only_ref).is_err());
    }

    #[test]
    fn resolves_references_location_independently() {
        let root = loan_account();
        let p = resolve_reference(&root, "#1").unwrap();
        assert_eq!(root.element_at(&p).unwrap().local_name(), "Body");
        assert_eq!(p, NodePath::new(vec![1]));
        assert_eq!(
            resolve_reference(&root, "#99"),
            Err(Error::ReferenceNotFound("99".into()))
        );

        let attacked = parse(include_bytes!("../../fixtures/loan_relocated.xml")).unwrap();
        let p = resolve_reference(&attacked, "#1").unwrap();
        let (parent, name) = parent_of(&attacked, &p).unwrap();
        assert_eq!(name, "Envelope");
        // the relocated original sits inside the Action header, not at Envelope level
        assert_eq!(p.len(), 4);
        assert_ne!(parent, NodePath::root());
        let body = attacked.element_at(&p).unwrap();
        assert!(body.text_content().contains("John Abraham"));
    }

    #[test]
    fn parent_lookup() {
        let root = loan_account();
        let body = resolve_reference(&root, "1").unwrap();
        assert_eq!(
            parent_of(&root, &body).unwrap(),
            (NodePath::root(), "Envelope".to_string())
        );
        let acct = resolve_reference(&root, "#2").unwrap();
        assert_eq!(
            parent_of(&root, &acct).unwrap(),
            (NodePath::new(vec![0]), "Header".to_string())
        );
        assert_eq!(parent_of(&root, &NodePath::root()), Err(Error::RootHasNoParent));
    }

    #[test]
    fn fresh_id_skips_used_values() {
        let root = loan_account();
        assert_eq!(fresh_id(&root), "4");
        assert_eq!(fresh_id(&Element::new("a")), "1");
    }

    #[test]
    fn relocation_changes_paths() {
        let mut root = loan_account();
        let body_path = resolve_reference(&root, "#1").unwrap();
        let body = root.remove(&body_path).unwrap();
        root.insert(&NodePath::new(vec![0]), 0, body).unwrap();
        let moved = resolve_reference(&root, "#1").unwrap();
        assert_ne!(moved, body_path);
        assert_eq!(depth_of(&root, &moved).unwrap(), 2);
    }

    #[test]
    fn swap_rejects_nested_paths() {
        let mut root = loan_account();
        let a = NodePath::new(vec![0]);
        assert!(root.swap(&a, &a.child(0)).is_err());
        let before = root.clone();
        root.swap(&a, &NodePath::new(vec![1])).unwrap();
        assert_eq!(root.children[0], before.children[1]);
        assert_eq!(root.children[1], before.children[0]);
    }
}
