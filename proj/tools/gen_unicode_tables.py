#!/usr/bin/env python3
"""Generate unicode_tables.inc from Python's unicodedata.

Emits codepoint range tables for the character classes the pipeline needs
(letters, decimal digits, punctuation/symbols, whitespace) and a simple
lowercase mapping table. Run from the repo root:

    python3 tools/gen_unicode_tables.py > include/finpipe/unicode_tables.inc
"""
import sys
import unicodedata

MAX_CP = 0x110000


def ranges_for(pred):
    out = []
    start = None
    for cp in range(MAX_CP):
        if pred(cp):
            if start is None:
                start = cp
        else:
            if start is not None:
                out.append((start, cp - 1))
                start = None
    if start is not None:
        out.append((start, MAX_CP - 1))
    return out


def cat(cp):
    return unicodedata.category(chr(cp))


def emit_ranges(name, rngs):
    print(f"inline constexpr CpRange {name}[] = {{")
    for i in range(0, len(rngs), 4):
        chunk = ", ".join(f"{{0x{a:X}, 0x{b:X}}}" for a, b in rngs[i:i + 4])
        print(f"    {chunk},")
    print("};")
    print()


def main():
    print("// Generated by tools/gen_unicode_tables.py -- do not edit.")
    print(f"// Python {sys.version.split()[0]}, unicodedata "
          f"{unicodedata.unidata_version}")
    print()
    print("struct CpRange { char32_t lo; char32_t hi; };")
    print("struct CaseMap { char32_t from; char32_t to; };")
    print()

    emit_ranges("kLetterRanges", ranges_for(lambda c: cat(c).startswith("L")))
    emit_ranges("kDigitRanges", ranges_for(lambda c: cat(c) == "Nd"))
    emit_ranges("kPunctSymbolRanges",
                ranges_for(lambda c: cat(c)[0] in "PS"))
    emit_ranges("kWhitespaceRanges",
                ranges_for(lambda c: chr(c).isspace()))

    lower = []
    for cp in range(MAX_CP):
        lo = ord(chr(cp).lower()) if len(chr(cp).lower()) == 1 else cp
        if lo != cp:
            lower.append((cp, lo))
    print(f"inline constexpr CaseMap kLowerMap[] = {{")
    for i in range(0, len(lower), 4):
        chunk = ", ".join(f"{{0x{a:X}, 0x{b:X}}}" for a, b in lower[i:i + 4])
        print(f"    {chunk},")
    print("};")


if __name__ == "__main__":
    main()
