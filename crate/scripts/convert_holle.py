#!/usr/bin/env python3
"""Convert Holl-E release files to the one-dialogue-per-line JSON corpus
format this project trains on.

Input: a Holl-E split (train.json / dev.json / test.json from the original
release, the variant whose examples carry "chat", "documents" / "doc", and
"spans" fields).

The background document is segmented into sentences; each even-indexed chat
message (the speaker who copies from the document) becomes a response turn
whose gold sentence is the one containing the annotated span, so the span is
always inside a whole sentence. Fuzzy containment falls back to the sentence
with the longest overlap.

Usage: convert_holle.py <holle_split.json> <out.jsonl>
"""

import json
import re
import sys


def split_sentences(document):
    parts = re.split(r"(?<=[.!?])\s+", document.replace("\n", " "))
    return [p.strip() for p in parts if p.strip()]


def best_sentence(span, sentences):
    if not span:
        return -1
    for i, s in enumerate(sentences):
        if span in s:
            return i
    # longest token overlap fallback
    span_tokens = set(span.lower().split())
    best, best_overlap = -1, 0
    for i, s in enumerate(sentences):
        overlap = len(span_tokens & set(s.lower().split()))
        if overlap > best_overlap:
            best, best_overlap = i, overlap
    return best


def document_of(example):
    docs = example.get("documents") or {}
    if isinstance(docs, dict):
        joined = " ".join(str(v) for v in docs.values() if isinstance(v, str))
        if joined.strip():
            return joined
    return str(example.get("doc") or example.get("document") or "")


def convert_example(idx, example):
    chat = example.get("chat", [])
    spans = example.get("spans", [])
    sentences = split_sentences(document_of(example))
    if not chat or not sentences:
        return None
    turns = []
    for i in range(1, len(chat), 2):
        post = str(chat[i - 1]).strip()
        response = str(chat[i]).strip()
        if not post or not response:
            continue
        span = str(spans[i]).strip() if i < len(spans) else ""
        gold = best_sentence(span, sentences)
        turns.append(
            {
                "post": post,
                "response": response,
                "knowledge": sentences,
                "gold_knowledge_index": gold,
            }
        )
    if not turns:
        return None
    return {"id": f"holle-{idx}", "turns": turns}


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    src, dst = sys.argv[1], sys.argv[2]
    with open(src) as f:
        data = json.load(f)
    written = 0
    with open(dst, "w") as out:
        for idx, example in enumerate(data):
            record = convert_example(idx, example)
            if record is None:
                continue
            out.write(json.dumps(record) + "\n")
            written += 1
    print(f"wrote {written} dialogues to {dst}")


if __name__ == "__main__":
    main()
