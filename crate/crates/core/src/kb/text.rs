//! Line reader shared by the ontology, lexicon, profile and plan formats.
//!
//! Every file is a sequence of blocks. A block starts with an unindented
//! line and owns the indented lines below it. `#` starts a comment outside
//! double quotes; words are split on whitespace, and a double-quoted run is
//! one word with the quotes removed.

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub no: usize,
    pub words: Vec<String>,
}

impl Line {
    pub fn word(&self, i: usize) -> Option<&str> {
        self.words.get(i).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub head: Line,
    pub body: Vec<Line>,
}

/// Split `text` into blocks. Errors carry the 1-based line number.
pub fn blocks(text: &str) -> Result<Vec<Block>, (usize, String)> {
    let mut out: Vec<Block> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let words = split_words(raw).map_err(|m| (no, m))?;
        if words.is_empty() {
            continue;
        }
        let indented = raw.starts_with(' ') || raw.starts_with('\t');
        let line = Line { no, words };
        if indented {
            match out.last_mut() {
                Some(b) => b.body.push(line),
                None => return Err((no, "indented line before any block".into())),
            }
        } else {
            out.push(Block {
                head: line,
                body: Vec::new(),
            });
        }
    }
    Ok(out)
}

fn split_words(raw: &str) -> Result<Vec<String>, String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut had_quote = false;
    for ch in raw.chars() {
        match ch {
            '"' => {
                quoted = !quoted;
                had_quote = true;
            }
            '#' if !quoted => break,
            c if c.is_whitespace() && !quoted => {
                if !cur.is_empty() || had_quote {
                    words.push(std::mem::take(&mut cur));
                }
                had_quote = false;
            }
            c => cur.push(c),
        }
    }
    if quoted {
        return Err("unterminated quote".into());
    }
    if !cur.is_empty() || had_quote {
        words.push(cur);
    }
    Ok(words)
}

pub fn is_concept_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().is_some_and(|c| c.is_ascii_uppercase())
        && s.chars()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '-')
}
