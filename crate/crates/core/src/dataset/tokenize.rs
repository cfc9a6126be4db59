/// Characters split off the end of a word as their own tokens.
const TRAILING_PUNCT: &[char] = &['?', '.', '!', ',', ';', ':', '"'];

/// Lowercases, splits on whitespace, detaches trailing punctuation and the
/// possessive `'s`. Underscored entity names stay single tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.to_lowercase().split_whitespace() {
        let mut word = raw;
        let mut tail = Vec::new();
        while let Some(c) = word.chars().last().filter(|c| TRAILING_PUNCT.contains(c)) {
            tail.push(c.to_string());
            word = &word[..word.len() - c.len_utf8()];
        }
        if let Some(base) = word.strip_suffix("'s").filter(|b| !b.is_empty()) {
            out.push(base.to_string());
            out.push("'s".to_string());
        } else if !word.is_empty() {
            out.push(word.to_string());
        }
        out.extend(tail.into_iter().rev());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_possessive_and_punctuation() {
        assert_eq!(
            tokenize("What does the son of princess_Sophia's mom do for a living?"),
            vec![
                "what",
                "does",
                "the",
                "son",
                "of",
                "princess_sophia",
                "'s",
                "mom",
                "do",
                "for",
                "a",
                "living",
                "?"
            ]
        );
    }

    #[test]
    fn possessive_before_punctuation() {
        assert_eq!(tokenize("Obama's?!"), vec!["obama", "'s", "?", "!"]);
        assert_eq!(tokenize("'s"), vec!["'s"]);
        assert!(tokenize("   ").is_empty());
    }
}
