use crate::text::tokenize;

/// Function words that are frequent in English questions and do not
/// occur as Spanish words.
pub const ENGLISH_STOPWORDS: &[&str] = &[
    "the", "of", "and", "in", "to", "is", "was", "who", "what", "which", "where", "when", "how", "many", "much",
    "are", "did", "does", "do", "by", "for", "with", "on", "from", "that", "this", "it", "as", "at", "be", "has",
    "have", "had", "his", "her", "its", "an", "were", "whom", "whose", "there", "their", "they", "than", "or",
    "been", "all", "list", "give", "me", "name", "born", "most", "which",
];

/// Function and question words that are frequent in Spanish questions and
/// do not occur as English words.
pub const SPANISH_STOPWORDS: &[&str] = &[
    "el", "la", "los", "las", "de", "del", "que", "qué", "y", "en", "un", "una", "unos", "unas", "es", "por", "con",
    "para", "como", "cómo", "cuál", "cual", "cuáles", "cuales", "quién", "quien", "quiénes", "quienes", "dónde",
    "donde", "cuándo", "cuando", "cuántos", "cuantos", "cuántas", "cuantas", "cuánto", "cuanto", "son", "fue",
    "fueron", "se", "su", "sus", "al", "lo", "más", "mas", "este", "esta", "estos", "estas", "hay", "tiene",
    "tienen", "nació", "dame", "ha", "han", "entre", "sobre", "también", "muy", "sin", "desde",
];

/// `"es"` or `"en"`.
///
/// An inverted question or exclamation mark means Spanish. Otherwise the
/// tokens found in each stopword list are counted (with repetition) and
/// the larger count wins; ties, including no matches, give English.
pub fn detect_language(question: &str) -> &'static str {
    if question.contains(['¿', '¡']) {
        return "es";
    }
    let (mut en, mut es) = (0usize, 0usize);
    for token in tokenize(question) {
        en += usize::from(ENGLISH_STOPWORDS.contains(&token.as_str()));
        es += usize::from(SPANISH_STOPWORDS.contains(&token.as_str()));
    }
    if es > en {
        "es"
    } else {
        "en"
    }
}
