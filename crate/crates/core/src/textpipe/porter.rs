//! Porter suffix-stripping stemmer.
//!
//! Follows the reference implementation distributed by the algorithm's
//! author, including its two small departures from the original rule table:
//! step 2 maps `bli -> ble` (instead of `abli -> able`) and adds
//! `logi -> log`. Words of one or two letters are returned unchanged.

/// Stems one lowercase token. Tokens containing anything other than ASCII
/// lowercase letters (digits, hyphens) pass through untouched.
pub fn porter_stem(token: &str) -> String {
    if token.len() <= 2 || !token.bytes().all(|b| b.is_ascii_lowercase()) {
        return token.to_string();
    }
    let mut w = Word(token.as_bytes().to_vec());
    w.step1a();
    w.step1b();
    w.step1c();
    w.step2();
    w.step3();
    w.step4();
    w.step5();
    String::from_utf8(w.0).expect("ascii in, ascii out")
}

struct Word(Vec<u8>);

impl Word {
    fn is_cons(&self, i: usize) -> bool {
        match self.0[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => i == 0 || !self.is_cons(i - 1),
            _ => true,
        }
    }

    /// Number of VC sequences in `self.0[..len]`.
    fn measure(&self, len: usize) -> usize {
        let mut m = 0;
        let mut i = 0;
        while i < len && self.is_cons(i) {
            i += 1;
        }
        loop {
            while i < len && !self.is_cons(i) {
                i += 1;
            }
            if i >= len {
                return m;
            }
            while i < len && self.is_cons(i) {
                i += 1;
            }
            m += 1;
        }
    }

    fn has_vowel(&self, len: usize) -> bool {
        (0..len).any(|i| !self.is_cons(i))
    }

    /// Ends in a double consonant at position `len - 1`.
    fn double_cons(&self, len: usize) -> bool {
        len >= 2 && self.0[len - 1] == self.0[len - 2] && self.is_cons(len - 1)
    }

    /// consonant-vowel-consonant ending at `len - 1`, last not w, x or y.
    fn cvc(&self, len: usize) -> bool {
        if len < 3 {
            return false;
        }
        let i = len - 1;
        self.is_cons(i)
            && !self.is_cons(i - 1)
            && self.is_cons(i - 2)
            && !matches!(self.0[i], b'w' | b'x' | b'y')
    }

    fn ends(&self, suffix: &str) -> bool {
        self.0.ends_with(suffix.as_bytes())
    }

    fn replace_suffix(&mut self, suffix_len: usize, with: &str) {
        let n = self.0.len() - suffix_len;
        self.0.truncate(n);
        self.0.extend_from_slice(with.as_bytes());
    }

    /// Applies the first rule whose suffix matches, if the stem before it has
    /// measure > `min_m`. Later rules are not tried once a suffix matched.
    fn apply_rules(&mut self, rules: &[(&str, &str)], min_m: usize) {
        for (suffix, with) in rules {
            if self.ends(suffix) {
                let stem_len = self.0.len() - suffix.len();
                if self.measure(stem_len) > min_m {
                    self.replace_suffix(suffix.len(), with);
                }
                return;
            }
        }
    }

    fn step1a(&mut self) {
        if self.ends("sses") {
            self.replace_suffix(4, "ss");
        } else if self.ends("ies") {
            self.replace_suffix(3, "i");
        } else if self.ends("ss") {
        } else if self.ends("s") {
            self.replace_suffix(1, "");
        }
    }

    fn step1b(&mut self) {
        if self.ends("eed") {
            if self.measure(self.0.len() - 3) > 0 {
                self.replace_suffix(1, "");
            }
            return;
        }
        let cut = if self.ends("ed") && self.has_vowel(self.0.len() - 2) {
            2
        } else if self.ends("ing") && self.has_vowel(self.0.len() - 3) {
            3
        } else {
            return;
        };
        self.replace_suffix(cut, "");
        if self.ends("at") || self.ends("bl") || self.ends("iz") {
            self.0.push(b'e');
        } else if self.double_cons(self.0.len()) {
            if !matches!(self.0.last(), Some(b'l' | b's' | b'z')) {
                self.0.pop();
            }
        } else if self.measure(self.0.len()) == 1 && self.cvc(self.0.len()) {
            self.0.push(b'e');
        }
    }

    fn step1c(&mut self) {
        let n = self.0.len();
        if self.ends("y") && self.has_vowel(n - 1) {
            self.0[n - 1] = b'i';
        }
    }

    fn step2(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("ational", "ate"),
            ("tional", "tion"),
            ("enci", "ence"),
            ("anci", "ance"),
            ("izer", "ize"),
            ("bli", "ble"),
            ("alli", "al"),
            ("entli", "ent"),
            ("eli", "e"),
            ("ousli", "ous"),
            ("ization", "ize"),
            ("ation", "ate"),
            ("ator", "ate"),
            ("alism", "al"),
            ("iveness", "ive"),
            ("fulness", "ful"),
            ("ousness", "ous"),
            ("aliti", "al"),
            ("iviti", "ive"),
            ("biliti", "ble"),
            ("logi", "log"),
        ];
        self.apply_rules(RULES, 0);
    }

    fn step3(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ful", ""),
            ("ness", ""),
        ];
        self.apply_rules(RULES, 0);
    }

    fn step4(&mut self) {
        const SUFFIXES: &[&str] = &[
            "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion",
            "ou", "ism", "ate", "iti", "ous", "ive", "ize",
        ];
        // The reference implementation dispatches on the penultimate letter,
        // so among suffixes sharing it the first listed wins. Sorting by that
        // letter would not change the outcome except for ement/ment/ent,
        // which are already longest-first.
        for suffix in SUFFIXES {
            if !self.ends(suffix) {
                continue;
            }
            let stem_len = self.0.len() - suffix.len();
            if *suffix == "ion" && !(stem_len > 0 && matches!(self.0[stem_len - 1], b's' | b't')) {
                continue;
            }
            if self.measure(stem_len) > 1 {
                self.0.truncate(stem_len);
            }
            return;
        }
    }

    fn step5(&mut self) {
        let n = self.0.len();
        if self.ends("e") {
            let m = self.measure(n - 1);
            if m > 1 || (m == 1 && !self.cvc(n - 1)) {
                self.0.pop();
            }
        }
        let n = self.0.len();
        if self.ends("l") && self.double_cons(n) && self.measure(n) > 1 {
            self.0.pop();
        }
    }
}
