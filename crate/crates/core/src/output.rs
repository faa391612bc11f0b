//! Deterministic text output: every float is rendered in a fixed
//! `%.12e`-style form so repeated runs produce byte-identical files.

/// Formats a float as `d.dddddddddddde±dd` (sign only when negative,
/// 12 fractional digits, two-or-more exponent digits with explicit sign).
pub fn fmt_float(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x }; // normalise -0.0
    let s = format!("{:.12e}", x);
    // Rust renders the exponent as e.g. "e0" / "e-3"; widen to "e+00" form.
    let (mantissa, exp) = s.split_once('e').expect("exponent marker");
    let (sign, digits) = match exp.strip_prefix('-') {
        Some(d) => ('-', d),
        None => ('+', exp),
    };
    if digits.len() >= 2 {
        format!("{mantissa}e{sign}{digits}")
    } else {
        format!("{mantissa}e{sign}0{digits}")
    }
}

/// Minimal JSON writer with caller-controlled field order.
pub struct JsonWriter {
    buf: String,
    needs_comma: Vec<bool>,
}

impl JsonWriter {
    pub fn new() -> Self {
        JsonWriter {
            buf: String::new(),
            needs_comma: Vec::new(),
        }
    }

    fn pre_value(&mut self) {
        if let Some(last) = self.needs_comma.last_mut() {
            if *last {
                self.buf.push(',');
            }
            *last = true;
        }
    }

    pub fn begin_object(&mut self) -> &mut Self {
        self.pre_value();
        self.buf.push('{');
        self.needs_comma.push(false);
        self
    }

    pub fn end_object(&mut self) -> &mut Self {
        self.needs_comma.pop();
        self.buf.push('}');
        self
    }

    pub fn begin_array(&mut self) -> &mut Self {
        self.pre_value();
        self.buf.push('[');
        self.needs_comma.push(false);
        self
    }

    pub fn end_array(&mut self) -> &mut Self {
        self.needs_comma.pop();
        self.buf.push(']');
        self
    }

    pub fn key(&mut self, k: &str) -> &mut Self {
        if let Some(last) = self.needs_comma.last_mut() {
            if *last {
                self.buf.push(',');
            }
            *last = false;
        }
        self.buf.push('"');
        self.push_escaped(k);
        self.buf.push_str("\":");
        self
    }

    // `%.12e` text is itself a valid JSON number token, so no quoting.
    pub fn float(&mut self, v: f64) -> &mut Self {
        self.pre_value();
        self.buf.push_str(&fmt_float(v));
        self
    }

    pub fn int(&mut self, v: i64) -> &mut Self {
        self.pre_value();
        self.buf.push_str(&v.to_string());
        self
    }

    pub fn string(&mut self, v: &str) -> &mut Self {
        self.pre_value();
        self.buf.push('"');
        self.push_escaped(v);
        self.buf.push('"');
        self
    }

    pub fn bool(&mut self, v: bool) -> &mut Self {
        self.pre_value();
        self.buf.push_str(if v { "true" } else { "false" });
        self
    }

    pub fn float_matrix(&mut self, m: &[Vec<f64>]) -> &mut Self {
        self.begin_array();
        for row in m {
            self.begin_array();
            for &v in row {
                self.float(v);
            }
            self.end_array();
        }
        self.end_array()
    }

    fn push_escaped(&mut self, s: &str) {
        for ch in s.chars() {
            match ch {
                '"' => self.buf.push_str("\\\""),
                '\\' => self.buf.push_str("\\\\"),
                '\n' => self.buf.push_str("\\n"),
                c if (c as u32) < 0x20 => {
                    self.buf.push_str(&format!("\\u{:04x}", c as u32));
                }
                c => self.buf.push(c),
            }
        }
    }

    /// Final JSON text, newline-terminated.
    pub fn finish(mut self) -> String {
        self.buf.push('\n');
        self.buf
    }
}

impl Default for JsonWriter {
    fn default() -> Self {
        Self::new()
    }
}
