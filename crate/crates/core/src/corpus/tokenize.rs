const PUNCTUATION: &[char] = &['.', ',', '?', '!', '\'', '"', '(', ')', ':'];

/// Lowercases `text`, splits off each punctuation mark as its own token and
/// splits the rest on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let mut current = String::new();
        for ch in word.chars() {
            if PUNCTUATION.contains(&ch) {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(ch.to_string());
            } else {
                current.extend(ch.to_lowercase());
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn splits_trailing_period() {
        assert_eq!(toks("We can think."), ["we", "can", "think", "."]);
        assert_eq!(toks("uh well yeah."), ["uh", "well", "yeah", "."]);
    }

    #[test]
    fn empty_and_blank() {
        assert!(toks("").is_empty());
        assert!(toks("  \n\t ").is_empty());
    }

    #[test]
    fn every_mark_is_its_own_token() {
        assert_eq!(
            toks("\"Hi,\" (she) said: don't!?"),
            ["\"", "hi", ",", "\"", "(", "she", ")", "said", ":", "don", "'", "t", "!", "?"]
        );
    }

    #[test]
    fn other_symbols_stay_attached() {
        assert_eq!(toks("e-mail $5;"), ["e-mail", "$5;"]);
    }
}
