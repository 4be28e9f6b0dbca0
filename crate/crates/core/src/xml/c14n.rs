use super::{Element, XmlNode};

/// Identifier of the canonical form produced here, as written into `CanonicalizationMethod`.
pub const C14N_METHOD: &str = "urn:soapguard:c14n:v1";

/// Deterministic byte form of a subtree.
///
/// Attributes are sorted by name, every element gets an explicit end tag,
/// no declaration or layout whitespace is emitted. Attribute values escape
/// `& < > "`; text escapes `& < >`.
pub fn serialize_canonical(root: &Element) -> Vec<u8> {
    let mut out = String::new();
    write_canonical(root, &mut out);
    out.into_bytes()
}

pub fn write_canonical(el: &Element, out: &mut String) {
    out.push('<');
    out.push_str(&el.name);
    let mut attrs: Vec<&(String, String)> = el.attributes.iter().collect();
    attrs.sort_by(|a, b| a.0.cmp(&b.0));
    for (name, value) in attrs {
        out.push(' ');
        out.push_str(name);
        out.push_str("=\"");
        escape_into(value, true, out);
        out.push('"');
    }
    out.push('>');
    for child in &el.children {
        match child {
            XmlNode::Element(e) => write_canonical(e, out),
            XmlNode::Text(t) => escape_into(t, false, out),
        }
    }
    out.push_str("</");
    out.push_str(&el.name);
    out.push('>');
}

fn escape_into(s: &str, attr: bool, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
}
