use std::sync::LazyLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

static RULES: LazyLock<[(Regex, &'static str); 4]> = LazyLock::new(|| {
    [
        // ASCII punctuation and symbols, except apostrophe, hyphen, period and comma
        (Regex::new(r"([\{-\~\[-`\x20-\&\(-\+:-@/])").unwrap(), " $1 "),
        // period and comma unless preceded by a digit
        (Regex::new(r"([^0-9])([\.,])").unwrap(), "$1 $2 "),
        // period and comma unless followed by a digit
        (Regex::new(r"([\.,])([^0-9])").unwrap(), " $1 $2"),
        // dash preceded by a digit
        (Regex::new(r"([0-9])(-)").unwrap(), "$1 $2 "),
    ]
});

/// The mteval-v13a tokenization used by sacrebleu's default `13a` scheme,
/// applied after NFC normalization and right-trimming.
pub fn tokenize_13a(text: &str) -> Vec<String> {
    let text: String = text.nfc().collect();
    let mut line = text.trim_end().replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if line.contains('&') {
        line = line.replace("&quot;", "\"").replace("&amp;", "&").replace("&lt;", "<").replace("&gt;", ">");
    }
    let mut line = format!(" {line} ");
    for (re, rep) in RULES.iter() {
        line = re.replace_all(&line, *rep).into_owned();
    }
    line.split_whitespace().map(str::to_string).collect()
}

pub(crate) fn lowercase_tokens(text: &str) -> Vec<String> {
    tokenize_13a(text).into_iter().map(|t| t.to_lowercase()).collect()
}
