//! Tweet tokenizer.
//!
//! User mentions, URLs and hashtags are replaced with placeholder tokens,
//! emoticons and emoji survive as single tokens, everything else is
//! lowercased. The pattern list follows the usual Twitter-aware tokenizers:
//! first match wins at each position, scanning left to right.

use std::sync::LazyLock;

use regex::Regex;

pub const USER_TOKEN: &str = "<user>";
pub const URL_TOKEN: &str = "<url>";
pub const HASHTAG_TOKEN: &str = "<hashtag>";

static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    let url = r"(?P<url>(?:https?://|www\.)\S+)";
    let user = r"(?P<user>@[\p{L}\p{N}_]+)";
    let hashtag = r"(?P<hashtag>\#+[\p{L}\p{N}_][\p{L}\p{N}_'\-]*)";
    let number = r"(?P<number>\p{N}+(?:[.,:/]\p{N}+)*)";
    let emoticon = concat!(
        r"(?P<emoticon>",
        r"[<>]?[:;=8][\-o\*']?[\)\]\(\[dDpP/:\}\{@\|\\]",
        r"|[\)\]\(\[dDpP/:\}\{@\|\\][\-o\*']?[:;=8][<>]?",
        r"|<3",
        r"|\p{Extended_Pictographic}(?:\x{FE0F}|\x{200D}\p{Extended_Pictographic})*",
        r")"
    );
    let word = r"(?P<word>[\p{L}\p{M}\p{N}_]+(?:['’\-][\p{L}\p{M}\p{N}_]+)*)";
    let ellipsis = r"(?P<ellipsis>\.(?:\s*\.)+|…)";
    let other = r"(?P<other>\S)";
    Regex::new(&[url, user, hashtag, number, emoticon, word, ellipsis, other].join("|"))
        .expect("token pattern compiles")
});

static HASHTAG_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\#+[\p{L}\p{N}_][\p{L}\p{N}_'\-]*").expect("hashtag pattern"));

/// Split a message into tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    TOKEN_RE
        .captures_iter(text)
        .map(|caps| {
            if caps.name("url").is_some() {
                URL_TOKEN.to_string()
            } else if caps.name("user").is_some() {
                USER_TOKEN.to_string()
            } else if caps.name("hashtag").is_some() {
                HASHTAG_TOKEN.to_string()
            } else if let Some(m) = caps.name("emoticon") {
                m.as_str().to_string()
            } else if caps.name("ellipsis").is_some() {
                "...".to_string()
            } else {
                caps[0].to_lowercase()
            }
        })
        .collect()
}

/// Hashtags in `text`, lowercased and with a single leading `#`.
pub fn hashtags(text: &str) -> Vec<String> {
    HASHTAG_RE
        .find_iter(text)
        .map(|m| format!("#{}", m.as_str().trim_start_matches('#').to_lowercase()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn placeholders_replace_users_and_urls() {
        assert_eq!(
            toks("@anna ser bra ut http://x.co"),
            ["<user>", "ser", "bra", "ut", "<url>"]
        );
    }

    #[test]
    fn emoticons_are_single_tokens() {
        assert_eq!(toks("hej :)"), ["hej", ":)"]);
        assert_eq!(toks("Nej :D <3"), ["nej", ":D", "<3"]);
        assert_eq!(toks("kul 😀!"), ["kul", "😀", "!"]);
    }

    #[test]
    fn hashtag_leads_metoo_post() {
        let t = toks("#MeToo. If all the women who have been sexually harassed");
        assert_eq!(t[0], "<hashtag>");
        assert_eq!(t[1], ".");
        assert_eq!(t[2], "if");
    }

    #[test]
    fn lowercases_and_keeps_order() {
        assert_eq!(toks("Han GÅR hem."), ["han", "går", "hem", "."]);
        assert_eq!(toks("det är 12:30 nu"), ["det", "är", "12:30", "nu"]);
        assert_eq!(toks("vänta..."), ["vänta", "..."]);
        assert_eq!(toks("bil-däck"), ["bil-däck"]);
    }

    #[test]
    fn empty_text_is_empty() {
        assert!(toks("").is_empty());
        assert!(toks("   ").is_empty());
    }

    #[test]
    fn hashtag_extraction_is_case_folded() {
        assert_eq!(hashtags("ja #MeToo och #Fika!"), ["#metoo", "#fika"]);
    }
}
