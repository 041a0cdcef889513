//! Tokenization shared by the classifier featurizer and the diversity metrics.

/// Lowercases `text` and splits it into maximal runs of alphanumeric
/// characters. Whitespace and punctuation both act as boundaries and are
/// dropped, so `"didn't"` becomes `["didn", "t"]`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_whitespace_and_punctuation() {
        assert_eq!(tokenize("Hi, there!  How's it?"), vec!["hi", "there", "how", "s", "it"]);
    }

    #[test]
    fn empty_and_symbol_only() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" ?!  ").is_empty());
    }

    #[test]
    fn unicode_lowercase() {
        assert_eq!(tokenize("ÉCOLE Straße"), vec!["école", "straße"]);
    }
}
