use super::{Element, XmlNode};
use crate::error::{Error, Result};

/// Parses a document in the supported XML subset and returns its root element.
///
/// A leading `<?xml ...?>` declaration is skipped. Whitespace-only text
/// between tags is dropped; other text is kept verbatim after entity decoding.
pub fn parse(input: &[u8]) -> Result<Element> {
    let text = std::str::from_utf8(input).map_err(|e| Error::MalformedXml {
        offset: e.valid_up_to(),
        reason: "input is not valid UTF-8".into(),
    })?;
    let mut p = Parser { src: text, pos: 0 };
    p.skip_prolog()?;
    if !p.starts_with("<") {
        return Err(p.err("expected root element"));
    }
    let root = p.element()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err("content after the root element"));
    }
    Ok(root)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::MalformedXml {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn starts_with(&self, s: &str) -> bool {
        self.rest().starts_with(s)
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn expect(&mut self, s: &str) -> Result<()> {
        if self.starts_with(s) {
            self.pos += s.len();
            Ok(())
        } else {
            Err(self.err(format!("expected {s:?}")))
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(is_xml_ws) {
            self.pos += 1;
        }
    }

    fn skip_prolog(&mut self) -> Result<()> {
        if self.starts_with("\u{feff}") {
            self.pos += 3;
        }
        if self.starts_with("<?xml") && self.rest()[5..].starts_with(|c: char| is_xml_ws(c)) {
            let end = self
                .rest()
                .find("?>")
                .ok_or_else(|| self.err("unterminated XML declaration"))?;
            self.pos += end + 2;
        }
        self.skip_ws();
        self.reject_markup_decl()
    }

    /// Comments, CDATA, DTDs and processing instructions are outside the subset.
    fn reject_markup_decl(&self) -> Result<()> {
        let r = self.rest();
        if r.starts_with("<!--") {
            Err(self.err("comments are not supported"))
        } else if r.starts_with("<![CDATA[") {
            Err(self.err("CDATA sections are not supported"))
        } else if r.starts_with("<!") {
            Err(self.err("DTD declarations are not supported"))
        } else if r.starts_with("<?") {
            Err(self.err("processing instructions are not supported"))
        } else {
            Ok(())
        }
    }

    fn name(&mut self) -> Result<String> {
        let start = self.pos;
        match self.peek() {
            Some(c) if is_name_start(c) => {
                self.bump();
            }
            _ => return Err(self.err("expected a name")),
        }
        while self.peek().is_some_and(is_name_char) {
            self.bump();
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn element(&mut self) -> Result<Element> {
        self.reject_markup_decl()?;
        self.expect("<")?;
        let name = self.name()?;
        let mut el = Element::new(name);
        loop {
            let had_ws = self.peek().is_some_and(is_xml_ws);
            self.skip_ws();
            if self.starts_with("/>") {
                self.pos += 2;
                return Ok(el);
            }
            if self.starts_with(">") {
                self.pos += 1;
                break;
            }
            if !had_ws {
                return Err(self.err("expected whitespace before attribute"));
            }
            let attr_start = self.pos;
            let attr = self.name()?;
            self.skip_ws();
            self.expect("=")?;
            self.skip_ws();
            let value = self.attr_value()?;
            if el.attr(&attr).is_some() {
                self.pos = attr_start;
                return Err(self.err(format!("duplicate attribute {attr:?}")));
            }
            el.attributes.push((attr, value));
        }
        self.content(&mut el)?;
        Ok(el)
    }

    fn attr_value(&mut self) -> Result<String> {
        let quote = match self.peek() {
            Some(q @ ('"' | '\'')) => q,
            _ => return Err(self.err("attribute value must be quoted")),
        };
        self.pos += 1;
        let end = self
            .rest()
            .find(quote)
            .ok_or_else(|| self.err("unterminated attribute value"))?;
        let raw = &self.rest()[..end];
        if let Some(i) = raw.find('<') {
            self.pos += i;
            return Err(self.err("'<' in attribute value"));
        }
        let value = self.decode(raw)?;
        self.pos += end + 1;
        Ok(value)
    }

    fn content(&mut self, el: &mut Element) -> Result<()> {
        loop {
            let text_end = self.rest().find('<').unwrap_or(self.rest().len());
            if text_end > 0 {
                let raw = &self.rest()[..text_end];
                let text = self.decode(raw)?;
                self.pos += text_end;
                if !text.chars().all(is_xml_ws) {
                    el.children.push(XmlNode::Text(text));
                }
            }
            if self.pos >= self.src.len() {
                return Err(self.err(format!("unclosed element <{}>", el.name)));
            }
            if self.starts_with("</") {
                self.pos += 2;
                let close = self.name()?;
                if close != el.name {
                    return Err(self.err(format!("mismatched closing tag </{close}> for <{}>", el.name)));
                }
                self.skip_ws();
                self.expect(">")?;
                return Ok(());
            }
            let child = self.element()?;
            el.children.push(XmlNode::Element(child));
        }
    }

    /// Decodes the five predefined entities; any other `&` is an error.
    fn decode(&self, raw: &str) -> Result<String> {
        if !raw.contains('&') {
            return Ok(raw.to_string());
        }
        let mut out = String::with_capacity(raw.len());
        let mut rest = raw;
        while let Some(i) = rest.find('&') {
            out.push_str(&rest[..i]);
            rest = &rest[i..];
            let (ch, len) = [
                ("&amp;", '&'),
                ("&lt;", '<'),
                ("&gt;", '>'),
                ("&quot;", '"'),
                ("&apos;", '\''),
            ]
            .iter()
            .find(|(ent, _)| rest.starts_with(ent))
            .map(|(ent, c)| (*c, ent.len()))
            .ok_or_else(|| Error::MalformedXml {
                offset: self.pos + (raw.len() - rest.len()),
                reason: "unknown or unterminated entity".into(),
            })?;
            out.push(ch);
            rest = &rest[len..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

/// Whether `name` is a legal element or attribute name in the supported subset.
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next().is_some_and(is_name_start) && chars.all(is_name_char)
}

fn is_xml_ws(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\n' | '\r')
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == ':'
}

fn is_name_char(c: char) -> bool {
    is_name_start(c) || c.is_alphanumeric() || matches!(c, '-' | '.')
}
