//! Deterministic canonical keys for exporter names and product codes.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Trailing legal-form tokens removed from exporter names.
pub const LEGAL_SUFFIXES: &[&str] = &[
    "AB", "AG", "BV", "CO", "CORP", "CORPORATION", "GMBH", "INC", "INCORPORATED", "KG", "LLC",
    "LLP", "LP", "LTD", "LTDA", "LIMITED", "NV", "OY", "PLC", "PTY", "SA", "SAC", "SARL", "SAS",
    "SL", "SPA", "SRL",
];

fn strip_marks(s: &str) -> String {
    s.nfkd().filter(|c| !is_combining_mark(*c)).collect()
}

/// Canonical exporter key: accents stripped, upper-cased, periods deleted,
/// other punctuation turned into spaces, whitespace collapsed and trailing
/// legal suffixes trimmed (never the last remaining token).
///
/// Returns `None` when nothing alphanumeric is left.
pub fn normalize_exporter(raw: &str) -> Option<String> {
    let folded = strip_marks(&strip_marks(raw).to_uppercase());
    let spaced: String = folded
        .chars()
        .filter(|c| *c != '.')
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let mut tokens: Vec<&str> = spaced.split_whitespace().collect();
    while tokens.len() > 1 && LEGAL_SUFFIXES.contains(tokens.last().unwrap()) {
        tokens.pop();
    }
    if tokens.is_empty() {
        None
    } else {
        Some(tokens.join(" "))
    }
}

/// Canonical 10-character product code; separators (spaces, dots, dashes)
/// are dropped and letters upper-cased.
pub fn normalize_product(raw: &str) -> Option<String> {
    let code: String = raw
        .chars()
        .filter(|c| !matches!(c, ' ' | '.' | '-'))
        .flat_map(char::to_uppercase)
        .collect();
    (code.chars().count() == 10 && code.chars().all(|c| c.is_ascii_alphanumeric())).then_some(code)
}

/// Upper-cased, trimmed unit label.
pub fn normalize_unit(raw: &str) -> String {
    raw.trim().to_uppercase()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(normalize_exporter("Acmé, S.A.").as_deref(), Some("ACME"));
        assert_eq!(normalize_exporter("ACME").as_deref(), Some("ACME"));
        assert_eq!(normalize_exporter("acme   sa").as_deref(), Some("ACME"));
        assert_eq!(normalize_exporter("  Müller & Söhne GmbH ").as_deref(), Some("MULLER SOHNE"));
        assert_eq!(normalize_exporter("Foo Co., Ltd.").as_deref(), Some("FOO"));
        assert_eq!(normalize_exporter("S.A.").as_deref(), Some("SA"));
        assert_eq!(normalize_exporter(" ,.;- "), None);
        assert_eq!(normalize_exporter(""), None);
    }

    #[test]
    fn product_codes() {
        assert_eq!(normalize_product("8471.30.00.00").as_deref(), Some("8471300000"));
        assert_eq!(normalize_product("847130000a").as_deref(), Some("847130000A"));
        assert_eq!(normalize_product("84713000"), None);
        assert_eq!(normalize_product("84713000001"), None);
        assert_eq!(normalize_product("84713_0000"), None);
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(raw in "\\PC{0,40}") {
            if let Some(once) = normalize_exporter(&raw) {
                prop_assert_eq!(normalize_exporter(&once), Some(once.clone()));
            }
        }

        #[test]
        fn latin_names_are_idempotent(raw in "[a-zA-Zéèüñç .,&-]{1,30}( (sa|s\\.a\\.|ltda|inc|llc|corp))*") {
            if let Some(once) = normalize_exporter(&raw) {
                prop_assert_eq!(normalize_exporter(&once), Some(once.clone()));
            }
        }
    }
}
