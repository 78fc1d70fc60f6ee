use super::mask::GuessMode;
use crate::overlap::rouge_l_tokens;

fn strip_quotes(s: &str) -> &str {
    for (open, close) in [('"', '"'), ('\'', '\''), ('“', '”'), ('‘', '’'), ('`', '`')] {
        if let Some(inner) = s.strip_prefix(open).and_then(|r| r.strip_suffix(close)) {
            return inner.trim();
        }
    }
    s
}

fn strip_option_letter(s: &str) -> &str {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some('A'..='D'), Some('.' | ')')) => chars.as_str().trim_start(),
        _ => s,
    }
}

fn strip_answer_label(s: &str) -> &str {
    let head = s.get(..7);
    if head.is_some_and(|h| h.eq_ignore_ascii_case("answer:")) {
        s[7..].trim_start()
    } else {
        s
    }
}

/// Pulls the guess out of a raw model reply.
pub fn parse_guess(raw: &str, mode: GuessMode) -> String {
    let mut s = raw.trim();
    if mode == GuessMode::QuestionBased {
        s = s.lines().next().unwrap_or("").trim();
    }
    s = strip_quotes(s);
    s = strip_answer_label(s);
    s = strip_quotes(s);
    s = strip_option_letter(s);
    strip_quotes(s).trim().to_string()
}

/// Lowercase, trim, collapse whitespace, drop trailing `.`, `?`, `!`.
pub fn normalize(s: &str) -> String {
    let collapsed = s
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    collapsed
        .trim_end_matches(['.', '?', '!'])
        .trim_end()
        .to_string()
}

/// Exact match and Rouge-L F1 of a parsed guess against the gold text.
/// `strict` compares the trimmed strings byte for byte instead.
pub fn score_guess(guess: &str, gold: &str, strict: bool) -> (u8, f64) {
    let (g, t) = (normalize(guess), normalize(gold));
    if g.is_empty() || t.is_empty() {
        return (0, 0.0);
    }
    let em = if strict {
        guess.trim() == gold.trim()
    } else {
        g == t
    };
    if g == t {
        return (u8::from(em), 1.0);
    }
    let gt: Vec<&str> = g.split(' ').collect();
    let tt: Vec<&str> = t.split(' ').collect();
    (u8::from(em), rouge_l_tokens(&gt, &tt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use GuessMode::*;

    #[test]
    fn parse_examples() {
        assert_eq!(parse_guess("\"fortune\"", QuestionBased), "fortune");
        assert_eq!(
            parse_guess("C. Drug traffickers", QuestionMultichoice),
            "Drug traffickers"
        );
        assert_eq!(parse_guess("B) Police", QuestionMultichoice), "Police");
        assert_eq!(
            parse_guess("Answer: China\nExplanation: …", QuestionBased),
            "China"
        );
        assert_eq!(
            parse_guess("Answer: line one\nline two", QuestionMultichoice),
            "line one\nline two"
        );
        assert_eq!(parse_guess("  \n ", QuestionBased), "");
        assert_eq!(parse_guess("Eagle.", QuestionBased), "Eagle.");
        assert_eq!(parse_guess("E. coli", QuestionBased), "E. coli");
    }

    #[test]
    fn score_examples() {
        assert_eq!(score_guess("Fortune", "fortune", false), (1, 1.0));
        assert_eq!(score_guess("Fortune", "fortune", true), (0, 1.0));
        assert_eq!(
            score_guess("drug dealers", "Drug traffickers", false),
            (0, 0.5)
        );
        assert_eq!(score_guess("", "anything", false), (0, 0.0));
        assert_eq!(
            score_guess(" San   Francisco! ", "san francisco", false),
            (1, 1.0)
        );
    }
}
