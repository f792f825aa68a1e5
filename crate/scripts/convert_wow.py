#!/usr/bin/env python3
"""Convert Wizard of Wikipedia release files to the one-dialogue-per-line
JSON corpus format this project trains on.

Input: one of the WoW JSON files (train.json, valid_random_split.json,
test_random_split.json, valid_topic_split.json, test_topic_split.json).

Output: JSONL with records
  {"id": ..., "turns": [{"post", "response", "knowledge": [...],
                         "gold_knowledge_index": int}]}

Each wizard message becomes one turn: the post is the preceding apprentice
message (or the chosen topic when the wizard opens), the knowledge pool is
the flattened retrieved passages for that message, and the gold index points
at the checked sentence (-1 when no passage was used).

Usage: convert_wow.py <wow_split.json> <out.jsonl>
"""

import json
import sys


def flatten_pool(message):
    pool = []
    for passage in message.get("retrieved_passages", []):
        for topic, sentences in passage.items():
            del topic
            pool.extend(sentences)
    return pool


def gold_index(message, pool):
    checked = message.get("checked_sentence", {})
    if not checked:
        return -1
    value = next(iter(checked.values()), None)
    key = next(iter(checked.keys()), "")
    if value is None or key == "no_passages_used" or value == "no_passages_used":
        return -1
    try:
        return pool.index(value)
    except ValueError:
        return -1


def convert_dialogue(idx, dialogue):
    turns = []
    previous_text = dialogue.get("chosen_topic", "") or "hello"
    for message in dialogue.get("dialog", []):
        speaker = message.get("speaker", "")
        text = message.get("text", "").strip()
        if "Wizard" in speaker:
            pool = flatten_pool(message)
            gold = gold_index(message, pool)
            if not text:
                continue
            turns.append(
                {
                    "post": previous_text or dialogue.get("chosen_topic", "hello"),
                    "response": text,
                    "knowledge": pool,
                    "gold_knowledge_index": gold,
                }
            )
            previous_text = text
        else:
            previous_text = text
    if not turns:
        return None
    return {"id": f"wow-{idx}", "turns": turns}


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    src, dst = sys.argv[1], sys.argv[2]
    with open(src) as f:
        data = json.load(f)
    written = 0
    with open(dst, "w") as out:
        for idx, dialogue in enumerate(data):
            record = convert_dialogue(idx, dialogue)
            if record is None:
                continue
            out.write(json.dumps(record) + "\n")
            written += 1
    print(f"wrote {written} dialogues to {dst}")


if __name__ == "__main__":
    main()
