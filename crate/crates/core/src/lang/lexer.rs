use super::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Unsigned magnitude; sign is applied by the parser so that
    /// `-2147483648` is representable.
    Int(u64),
    Double(f64),
    Char(u16),
    /// `?H<k>` opening a hole marker.
    HoleMark(u32),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const PUNCTS: [&str; 39] = [
    ">>>", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "+", "-", "*",
    "/", "%", "<", ">", "=", "!", "~", "(", ")", "{", "}", "[", "]", ";", ",", ".", ":", "?", "&", "|",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let (l0, c0) = (line, col);
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(ParseError::new(l0, c0, "unterminated block comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        let (tl, tc) = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tl, col: tc });

        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            push(&mut out, Tok::Ident(word));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let mut is_double = false;
            if i < chars.len() && chars[i] == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                is_double = true;
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = (i, line, col);
                let mut j = i + 1;
                if chars.get(j).is_some_and(|s| *s == '+' || *s == '-') {
                    j += 1;
                }
                if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                    is_double = true;
                    while i < j {
                        bump!();
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                } else {
                    (i, line, col) = save;
                }
            }
            let text: String = chars[start..i].iter().collect();
            if is_double {
                let v: f64 = text.parse().map_err(|_| ParseError::new(tl, tc, format!("bad double literal `{text}`")))?;
                push(&mut out, Tok::Double(v));
            } else {
                let v: u64 = text.parse().map_err(|_| ParseError::new(tl, tc, format!("bad int literal `{text}`")))?;
                push(&mut out, Tok::Int(v));
            }
            continue;
        }
        if c == '\'' {
            bump!();
            let v = match chars.get(i) {
                None => return Err(ParseError::new(tl, tc, "unterminated char literal")),
                Some('\\') => {
                    bump!();
                    let esc = *chars.get(i).ok_or_else(|| ParseError::new(tl, tc, "unterminated char literal"))?;
                    bump!();
                    match esc {
                        'n' => '\n' as u16,
                        't' => '\t' as u16,
                        'r' => '\r' as u16,
                        '0' => 0,
                        '\\' => '\\' as u16,
                        '\'' => '\'' as u16,
                        'u' => {
                            if i + 4 > chars.len() {
                                return Err(ParseError::new(tl, tc, "short \\u escape"));
                            }
                            let hex: String = chars[i..i + 4].iter().collect();
                            let v = u16::from_str_radix(&hex, 16)
                                .map_err(|_| ParseError::new(tl, tc, format!("bad \\u escape `{hex}`")))?;
                            for _ in 0..4 {
                                bump!();
                            }
                            v
                        }
                        other => return Err(ParseError::new(tl, tc, format!("unknown escape `\\{other}`"))),
                    }
                }
                Some(&ch) => {
                    bump!();
                    let code = ch as u32;
                    if code > 0xFFFF {
                        return Err(ParseError::new(tl, tc, "char literal outside 16-bit range"));
                    }
                    code as u16
                }
            };
            if chars.get(i) != Some(&'\'') {
                return Err(ParseError::new(tl, tc, "unterminated char literal"));
            }
            bump!();
            push(&mut out, Tok::Char(v));
            continue;
        }
        if c == '?' && chars.get(i + 1) == Some(&'H') && chars.get(i + 2).is_some_and(|d| d.is_ascii_digit()) {
            bump!();
            bump!();
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            let id = text.parse().map_err(|_| ParseError::new(tl, tc, "bad hole id"))?;
            push(&mut out, Tok::HoleMark(id));
            continue;
        }
        let rest = &chars[i..];
        let Some(p) = PUNCTS.iter().find(|p| rest.len() >= p.len() && p.chars().zip(rest).all(|(a, b)| a == *b)) else {
            return Err(ParseError::new(tl, tc, format!("unexpected character `{c}`")));
        };
        for _ in 0..p.len() {
            bump!();
        }
        push(&mut out, Tok::Punct(p));
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
