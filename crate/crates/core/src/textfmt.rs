//! Line-oriented `key = value` text with optional `[section]` headers and
//! `#` comments. Shared by the material database and run configurations.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    /// `None` for entries before the first header.
    pub name: Option<String>,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

pub fn parse(text: &str) -> Result<Vec<Section>> {
    let mut sections = vec![Section { name: None, line: 0, entries: Vec::new() }];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name =
                rest.strip_suffix(']').ok_or_else(|| Error::parse(line, "section header is missing `]`"))?.trim();
            if name.is_empty() {
                return Err(Error::parse(line, "empty section name"));
            }
            sections.push(Section { name: Some(name.to_string()), line, entries: Vec::new() });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::parse(line, format!("expected `key = value`, got `{content}`")))?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::parse(line, format!("bad key `{key}`")));
        }
        let current = sections.last_mut().expect("never empty");
        if current.get(key).is_some() {
            return Err(Error::parse(line, format!("duplicate key `{key}`")));
        }
        current.entries.push(Entry { key: key.to_string(), value: value.trim().to_string(), line });
    }
    if sections[0].entries.is_empty() {
        sections.remove(0);
    }
    Ok(sections)
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(head, _)| head)
}

/// Comma-separated floats.
pub fn parse_list(value: &str, line: usize) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::parse(line, format!("`{}` is not a number", s.trim()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let text = "top = 1\n# comment\n[a b]\nx = 2 nm # trailing\n\n[c]\ny=3\n";
        let s = parse(text).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].name, None);
        assert_eq!(s[1].name.as_deref(), Some("a b"));
        assert_eq!(s[1].get("x").unwrap().value, "2 nm");
        assert_eq!(s[1].get("x").unwrap().line, 4);
        assert_eq!(s[2].get("y").unwrap().value, "3");
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(parse("a = 1\nnonsense\n").unwrap_err(), Error::parse(2, "expected `key = value`, got `nonsense`"));
        assert!(matches!(parse("[x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("a=1\na=2\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_text() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("# nothing\n\n").unwrap().is_empty());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list("1, 2.5,-3e-2", 1).unwrap(), vec![1.0, 2.5, -0.03]);
        assert!(parse_list("1,,2", 7).is_err());
    }
}
