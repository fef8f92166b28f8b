//! Rule-based sentence segmentation.

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "ft", "rev", "hon", "gen", "col",
    "lt", "sgt", "capt", "cmdr", "gov", "sen", "rep", "pres", "vs", "etc", "e.g", "i.e", "cf",
    "al", "approx", "inc", "ltd", "co", "corp", "bros", "no", "nos", "vol", "vols", "fig",
    "figs", "p", "pp", "ch", "sec", "ed", "eds", "jan", "feb", "mar", "apr", "jun", "jul", "aug",
    "sep", "sept", "oct", "nov", "dec", "u.s", "u.k", "u.n", "a.m", "p.m", "ca", "c", "est",
    "dept", "univ", "assn", "ave", "blvd", "rd",
];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '\u{2026}')
}

fn is_closing(c: char) -> bool {
    matches!(
        c,
        '"' | '\'' | ')' | ']' | '}' | '\u{201D}' | '\u{2019}' | '\u{00BB}'
    )
}

/// The word immediately preceding the terminal period at byte `dot`.
fn word_before(text: &str, dot: usize) -> &str {
    let head = &text[..dot];
    let start = head
        .char_indices()
        .rev()
        .find(|&(_, c)| c.is_whitespace())
        .map_or(0, |(i, c)| i + c.len_utf8());
    head[start..].trim_start_matches(|c: char| !c.is_alphanumeric())
}

fn is_abbreviation(word: &str) -> bool {
    if word.is_empty() {
        return false;
    }
    let mut chars = word.chars();
    let first = chars.next().unwrap();
    if chars.next().is_none() && first.is_uppercase() {
        // initials: "J. Smith"
        return true;
    }
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// Splits `text` into trimmed, non-empty sentences.
///
/// A boundary is placed after a run of terminal punctuation (plus any closing
/// quotes or brackets) when it is followed by whitespace and the next
/// character is not a lowercase letter. A single `.` after a known
/// abbreviation or an uppercase initial is not a boundary.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut k = 0usize;
    while k < chars.len() {
        let (pos, c) = chars[k];
        if !is_terminal(c) {
            k += 1;
            continue;
        }
        let run_start = k;
        let mut end = k + 1;
        while end < chars.len() && is_terminal(chars[end].1) {
            end += 1;
        }
        while end < chars.len() && is_closing(chars[end].1) {
            end += 1;
        }
        let at_end = end == chars.len();
        let followed_by_space = at_end || chars[end].1.is_whitespace();
        if !followed_by_space {
            k = end;
            continue;
        }
        let mut next = end;
        while next < chars.len() && chars[next].1.is_whitespace() {
            next += 1;
        }
        let next_char = chars.get(next).map(|&(_, n)| n);
        let single_period =
            c == '.' && chars[run_start + 1..end].iter().all(|&(_, x)| is_closing(x));
        let guarded = single_period && is_abbreviation(word_before(text, pos));
        let lowercase_next = next_char.is_some_and(|n| n.is_lowercase());
        if next_char.is_some() && (guarded || lowercase_next) {
            k = end;
            continue;
        }
        let boundary = chars.get(end).map_or(text.len(), |&(p, _)| p);
        push_trimmed(&mut out, &text[start..boundary]);
        start = boundary;
        k = end;
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_sentences() {
        assert_eq!(split_sentences("A b. C d."), ["A b.", "C d."]);
    }

    #[test]
    fn abbreviation_does_not_split() {
        assert!(ABBREVIATIONS.contains(&"dr"));
        assert_eq!(split_sentences("Dr. Smith arrived."), ["Dr. Smith arrived."]);
        assert_eq!(
            split_sentences("He met J. Smith. They talked."),
            ["He met J. Smith.", "They talked."]
        );
        assert_eq!(
            split_sentences("Cats, dogs, etc. Are pets."),
            ["Cats, dogs, etc. Are pets."]
        );
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   \n ").is_empty());
    }

    #[test]
    fn quotes_and_runs() {
        assert_eq!(
            split_sentences("He said \"stop!\" Then left?! Yes."),
            ["He said \"stop!\"", "Then left?!", "Yes."]
        );
        assert_eq!(split_sentences("Pi is 3.14 today."), ["Pi is 3.14 today."]);
        assert_eq!(split_sentences("wait... and then"), ["wait... and then"]);
        assert_eq!(split_sentences("No terminal"), ["No terminal"]);
    }

    proptest! {
        #[test]
        fn reconstructs_input_modulo_whitespace(text in "[A-Za-z .!?\n\"]{0,80}") {
            let joined: String = split_sentences(&text).concat();
            let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
            prop_assert_eq!(strip(&joined), strip(&text));
        }

        #[test]
        fn sentences_are_trimmed_and_nonempty(text in "\\PC{0,60}") {
            for s in split_sentences(&text) {
                prop_assert!(!s.is_empty());
                prop_assert_eq!(s.trim(), s.as_str());
            }
        }
    }
}
