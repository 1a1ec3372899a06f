/// Parses a free-text numeric cell.
///
/// Units and stray characters are discarded: the first numeric token (sign,
/// digits, `.`/`,` separators, optional exponent) is taken. When both `.` and
/// `,` occur the rightmost one is the decimal mark and the other groups
/// thousands; a single lone `,` is a decimal mark; repeated identical
/// separators are thousands groups. Anything without digits, or that does not
/// resolve to a finite number, is missing.
pub fn parse_numeric(text: &str) -> Option<f64> {
    let chars: Vec<char> = text.chars().map(|c| if c == '\u{2212}' { '-' } else { c }).collect();
    let token = first_numeric_token(&chars)?;
    let normalized = normalize_separators(&token)?;
    let v: f64 = normalized.parse().ok()?;
    v.is_finite().then_some(v)
}

fn is_sep(c: char) -> bool {
    c == '.' || c == ','
}

fn first_numeric_token(chars: &[char]) -> Option<String> {
    let n = chars.len();
    let mut i = 0;
    while i < n {
        let c = chars[i];
        let starts_body = |k: usize| -> bool {
            k < n && (chars[k].is_ascii_digit() || (is_sep(chars[k]) && k + 1 < n && chars[k + 1].is_ascii_digit()))
        };
        let (sign, body_start) = if (c == '-' || c == '+') && starts_body(i + 1) {
            (Some(c), i + 1)
        } else if starts_body(i) {
            (None, i)
        } else {
            i += 1;
            continue;
        };

        let mut token = String::new();
        if sign == Some('-') {
            token.push('-');
        }
        let mut k = body_start;
        while k < n && (chars[k].is_ascii_digit() || is_sep(chars[k])) {
            token.push(chars[k]);
            k += 1;
        }
        // exponent only when digits follow
        if k < n && (chars[k] == 'e' || chars[k] == 'E') {
            let mut m = k + 1;
            let mut exp = String::from("e");
            if m < n && (chars[m] == '-' || chars[m] == '+') {
                exp.push(chars[m]);
                m += 1;
            }
            let digits_start = m;
            while m < n && chars[m].is_ascii_digit() {
                exp.push(chars[m]);
                m += 1;
            }
            if m > digits_start {
                token.push_str(&exp);
            }
        }
        return Some(token);
    }
    None
}

fn normalize_separators(token: &str) -> Option<String> {
    let (mantissa, exponent) = match token.find('e') {
        Some(p) => token.split_at(p),
        None => (token, ""),
    };
    let dots = mantissa.matches('.').count();
    let commas = mantissa.matches(',').count();
    let out = match (dots, commas) {
        (0, 0) => mantissa.to_string(),
        (_, 0) if dots > 1 => mantissa.replace('.', ""),
        (0, _) if commas > 1 => mantissa.replace(',', ""),
        (_, 0) => mantissa.to_string(),
        (0, _) => mantissa.replace(',', "."),
        _ => {
            let last_dot = mantissa.rfind('.')?;
            let last_comma = mantissa.rfind(',')?;
            let (decimal, grouping, decimal_count) =
                if last_dot > last_comma { ('.', ',', dots) } else { (',', '.', commas) };
            if decimal_count > 1 {
                return None;
            }
            mantissa.replace(grouping, "").replace(decimal, ".")
        }
    };
    Some(format!("{out}{exponent}"))
}
