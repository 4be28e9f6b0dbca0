//! SOAP view of a parsed tree: Envelope, Header blocks and Body.
//!
//! The view is tolerant: attacked messages with several Body elements or a
//! missing Header are still represented so validators can examine them.

use crate::error::{Error, Result};
use crate::time::UnixTime;
use crate::xml::{is_valid_name, Element, NodePath};

pub const ROLE_NONE: &str = "none";
pub const ROLE_NEXT: &str = "next";
pub const ROLE_ULTIMATE_RECEIVER: &str = "ultimateReceiver";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoapEnvelope {
    root: Element,
    header_path: Option<NodePath>,
    body_paths: Vec<NodePath>,
    well_formed: bool,
}

impl SoapEnvelope {
    pub fn root(&self) -> &Element {
        &self.root
    }

    pub fn into_root(self) -> Element {
        self.root
    }

    pub fn header_path(&self) -> Option<&NodePath> {
        self.header_path.as_ref()
    }

    pub fn header(&self) -> Option<&Element> {
        self.header_path.as_ref().and_then(|p| self.root.element_at(p))
    }

    /// Every Envelope-level Body, in document order.
    pub fn body_paths(&self) -> &[NodePath] {
        &self.body_paths
    }

    /// True for the `Header, Body` and `Body` child layouts.
    pub fn well_formed(&self) -> bool {
        self.well_formed
    }

    /// Applies an edit to the tree and reclassifies the result.
    pub fn edit<F>(self, f: F) -> Result<SoapEnvelope>
    where
        F: FnOnce(&mut Element) -> Result<()>,
    {
        let mut root = self.root;
        f(&mut root)?;
        as_envelope(root)
    }
}

pub fn as_envelope(root: Element) -> Result<SoapEnvelope> {
    if root.local_name() != "Envelope" {
        return Err(Error::NotAnEnvelope(root.name.clone()));
    }
    let mut header_path = None;
    let mut body_paths = Vec::new();
    let mut layout = Vec::new();
    for (i, child) in root.children.iter().enumerate() {
        let Some(el) = child.as_element() else {
            continue;
        };
        match el.local_name() {
            "Header" if header_path.is_none() => header_path = Some(NodePath::new(vec![i])),
            "Body" => body_paths.push(NodePath::new(vec![i])),
            _ => {}
        }
        layout.push(el.local_name());
    }
    let well_formed = layout == ["Header", "Body"] || layout == ["Body"];
    Ok(SoapEnvelope {
        root,
        header_path,
        body_paths,
        well_formed,
    })
}

/// A direct child of Header, with SOAP targeting attributes resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderBlock {
    pub path: NodePath,
    pub name: String,
    pub role: String,
    pub must_understand: bool,
}

impl HeaderBlock {
    /// Whether a node acting in `node_role` processes this block.
    pub fn targets(&self, node_role: &str) -> bool {
        match self.role.as_str() {
            ROLE_NONE => false,
            ROLE_NEXT => true,
            r => r == node_role,
        }
    }
}

/// Maps the SOAP 1.2 role URIs onto the short vocabulary.
fn normalize_role(raw: &str) -> String {
    let tail = raw.rsplit('/').next().unwrap_or(raw);
    match tail {
        ROLE_NONE | ROLE_NEXT | ROLE_ULTIMATE_RECEIVER if raw.contains("/role/") => tail.to_string(),
        _ => raw.to_string(),
    }
}

pub fn header_blocks(env: &SoapEnvelope) -> Vec<HeaderBlock> {
    let (Some(hp), Some(header)) = (env.header_path(), env.header()) else {
        return Vec::new();
    };
    header
        .children
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.as_element().map(|e| (i, e)))
        .map(|(i, el)| HeaderBlock {
            path: hp.child(i),
            name: el.name.clone(),
            role: el
                .attr_local("role")
                .or_else(|| el.attr_local("actor"))
                .map(normalize_role)
                .unwrap_or_else(|| ROLE_ULTIMATE_RECEIVER.to_string()),
            must_understand: matches!(el.attr_local("mustUnderstand"), Some("true" | "1")),
        })
        .collect()
}

/// The header blocks a node acting in `node_role` actually processes.
pub fn processed_blocks(env: &SoapEnvelope, node_role: &str) -> Vec<HeaderBlock> {
    header_blocks(env)
        .into_iter()
        .filter(|b| b.targets(node_role))
        .collect()
}

/// Whether `path` lies inside (or is) a header block processed in `node_role`.
pub fn in_processing_view(env: &SoapEnvelope, node_role: &str, path: &NodePath) -> bool {
    processed_blocks(env, node_role)
        .iter()
        .any(|b| b.path.is_prefix_of(path))
}

/// Inserts an empty header block targeted at `role` as the first Header
/// child, creating the Header when absent.
pub fn insert_header_block(env: SoapEnvelope, name: &str, role: &str) -> Result<SoapEnvelope> {
    if !is_valid_name(name) {
        return Err(Error::InvalidHeaderName(name.to_string()));
    }
    env.edit(|root| {
        let header = crate::dsig::ensure_header(root);
        root.insert(&header, 0, Element::new(name).with_attr("role", role).into())
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MessageMeta {
    pub message_id: Option<String>,
    pub timestamp: Option<UnixTime>,
    pub message_id_path: Option<NodePath>,
    pub timestamp_path: Option<NodePath>,
}

/// MessageID and Timestamp, preferring direct Header children over nested ones.
pub fn message_meta(env: &SoapEnvelope) -> Result<MessageMeta> {
    let mut meta = MessageMeta::default();
    let Some(hp) = env.header_path() else {
        return Ok(meta);
    };
    if let Some((path, el)) = find_under_header(env, hp, "MessageID") {
        meta.message_id = Some(el.text_content());
        meta.message_id_path = Some(path);
    }
    if let Some((path, el)) = find_under_header(env, hp, "Timestamp") {
        meta.timestamp = Some(UnixTime::parse_iso(&el.text_content())?);
        meta.timestamp_path = Some(path);
    }
    Ok(meta)
}

fn find_under_header<'a>(env: &'a SoapEnvelope, hp: &NodePath, local: &str) -> Option<(NodePath, &'a Element)> {
    let header = env.root().element_at(hp)?;
    if let Some(i) = header.child_index(local) {
        let path = hp.child(i);
        return env.root().element_at(&path).map(|e| (path, e));
    }
    header
        .elements()
        .into_iter()
        .skip(1)
        .find(|(_, e)| e.local_name() == local)
        .map(|(p, e)| {
            let mut full = hp.to_vec();
            full.extend_from_slice(p.indices());
            (NodePath::new(full), e)
        })
}
