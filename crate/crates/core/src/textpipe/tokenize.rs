use serde::{Deserialize, Serialize};

/// Ordered lowercase tokens. No token is empty or contains whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenList(pub Vec<String>);

impl TokenList {
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<&str>> for TokenList {
    fn from(v: Vec<&str>) -> Self {
        TokenList(v.into_iter().map(String::from).collect())
    }
}

/// Tokenizer output: the feature tokens plus the `@`/`#` names that were
/// pulled out of them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tokenized {
    pub tokens: TokenList,
    pub mentions: Vec<String>,
    pub hashtags: Vec<String>,
}

fn is_url(chunk: &str) -> bool {
    let c = chunk.to_ascii_lowercase();
    c.starts_with("http://") || c.starts_with("https://") || c.starts_with("www.")
}

/// Splits a post into lowercase tokens.
///
/// Words are runs of ASCII letters and digits. Apostrophes inside a word are
/// dropped (`don't` -> `dont`); a hyphen joins two letters (`roll-over`) but
/// splits anything else (`i-66` -> `i`, `66`). URLs are discarded. A `#` or
/// `@` followed by a name moves that name into the metadata lists. All other
/// characters, including non-ASCII symbols, separate tokens.
pub fn tokenize(text: &str) -> Tokenized {
    let mut out = Tokenized::default();
    for chunk in text.split_whitespace() {
        if is_url(chunk) {
            continue;
        }
        let chars: Vec<char> = chunk.chars().collect();
        let mut cur = String::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_ascii_alphanumeric() {
                cur.push(c.to_ascii_lowercase());
                i += 1;
                continue;
            }
            let prev_alpha = i > 0 && chars[i - 1].is_ascii_alphabetic();
            let next = chars.get(i + 1).copied();
            if c == '-' && prev_alpha && !cur.is_empty() && next.is_some_and(|n| n.is_ascii_alphabetic()) {
                cur.push('-');
                i += 1;
                continue;
            }
            if matches!(c, '\'' | '\u{2019}')
                && !cur.is_empty()
                && next.is_some_and(|n| n.is_ascii_alphanumeric())
            {
                i += 1;
                continue;
            }
            flush(&mut cur, &mut out.tokens.0);
            if (c == '#' || c == '@') && next.is_some_and(|n| n.is_ascii_alphanumeric() || n == '_') {
                let mut name = String::new();
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    name.push(chars[i].to_ascii_lowercase());
                    i += 1;
                }
                if c == '#' {
                    out.hashtags.push(name);
                } else {
                    out.mentions.push(name);
                }
                continue;
            }
            i += 1;
        }
        flush(&mut cur, &mut out.tokens.0);
    }
    out
}

fn flush(cur: &mut String, tokens: &mut Vec<String>) {
    if !cur.is_empty() {
        tokens.push(std::mem::take(cur));
    }
}

/// [`tokenize`] without the metadata.
pub fn normalize_tokenize(text: &str) -> TokenList {
    tokenize(text).tokens
}
