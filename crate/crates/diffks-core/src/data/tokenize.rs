//! Rule-based tokenizer.
//!
//! Rules, in order:
//!   1. the input is unicode-lowercased;
//!   2. runs of alphanumeric characters form words;
//!   3. an apostrophe with an alphanumeric character on both sides stays
//!      inside the word (contractions: "it's", "o'brien's");
//!   4. every other non-whitespace character is its own single-char token;
//!   5. whitespace of any kind separates tokens and collapses.
//!
//! The 20-case golden file at tests/data/tokenizer_golden.tsv freezes this
//! behaviour.

pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut tokens = Vec::new();
    let mut word = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            word.push(c);
        } else if c == '\''
            && i > 0
            && chars[i - 1].is_alphanumeric()
            && i + 1 < chars.len()
            && chars[i + 1].is_alphanumeric()
        {
            word.push(c);
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect()
    }

    #[test]
    fn splits_punctuation() {
        assert_eq!(tokenize("Hello, world!"), toks("hello , world !"));
    }

    #[test]
    fn empty_input_gives_empty_sequence() {
        assert_eq!(tokenize(""), Vec::<String>::new());
    }

    #[test]
    fn whitespace_kinds_collapse() {
        assert_eq!(tokenize("tab\tseparated"), toks("tab separated"));
        assert_eq!(tokenize("newline\nsplit"), toks("newline split"));
        assert_eq!(tokenize("   only   spaces "), toks("only spaces"));
    }

    #[test]
    fn golden_file() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/tokenizer_golden.tsv");
        let text = std::fs::read_to_string(path).expect("golden file present");
        let mut cases = 0;
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (input, expected) = line
                .split_once('\t')
                .unwrap_or_else(|| panic!("golden line {} lacks a tab", lineno + 1));
            assert_eq!(
                tokenize(input),
                toks(expected),
                "golden case {} (input {:?})",
                lineno + 1,
                input
            );
            cases += 1;
        }
        assert_eq!(cases, 20, "golden file should hold 20 cases");
    }
}
