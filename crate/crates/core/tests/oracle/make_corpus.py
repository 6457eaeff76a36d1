"""Writes the synthetic DWUG-layout fixture corpus and its definitions file.

Run from this directory: python3 make_corpus.py
The output is checked in; rerunning must reproduce it byte for byte.
"""

import json
import os
import re

HERE = os.path.dirname(os.path.abspath(__file__))
CORPUS = os.path.join(HERE, "..", "fixtures", "corpus")

# (id, grouping, cluster, surface form, context, definition)
LEMMAS = {
    "word": ("nn", [
        ("w01", 1, 0, "word", "He could not utter a single word of the language.", "A single spoken or written unit of language"),
        ("w02", 1, 0, "word", "She spelled the word slowly on the slate.", "A single unit of language written or spoken"),
        ("w03", 2, 0, "word", "The word is written in bold letters on the sign.", "A written unit of language"),
        ("w04", 2, 0, "word", "Type a word into the search box.", "A single spoken or written unit of language"),
        ("w05", 1, 1, "word", "We received word of his safe arrival yesterday.", "Information or news about something"),
        ("w06", 1, 1, "Word", "Word came from the front that the battle was lost.", "News or information; a report"),
        ("w07", 2, 1, "word", "Send word as soon as you land.", "A message or news"),
        ("w08", 2, 1, "word", "Is there any word on the election results?", "Information; news; reports"),
        ("w09", 1, 2, "word", "I give you my word that I will return.", "A promise, vow or statement"),
        ("w10", 1, 2, "word", "He was a man of his word.", "A promise or assurance"),
        ("w11", 2, 2, "word", "She kept her word and paid the debt.", "A promise, vow or statement."),
        ("w12", 2, 2, "word", "You have my word on it.", "A solemn promise"),
        ("w13", 2, -1, "Word", "Word up, my friend.", "An expression of agreement"),
    ]),
    "record": ("nn", [
        ("r01", 1, 0, "record", "The parish record shows his baptism in 1822.", "A written document providing information about past events"),
        ("r02", 1, 0, "record", "No record of the meeting was kept.", "A document providing information about past events"),
        ("r03", 1, 0, "record", "The clerk made a record of every sale.", "A written account of past events"),
        ("r04", 1, 0, "record", "History keeps a record of such deeds.", "A document providing information about past events"),
        ("r05", 2, 0, "record", "The hospital has no record of her admission.", "A document providing information about past events"),
        ("r06", 2, 0, "record", "Keep a record of your expenses.", "A written account of past events"),
        ("r07", 2, 0, "record", "The court record was sealed.", "An official document of past events"),
        ("r08", 2, 0, "record", "Check the service record of the car.", "A document providing information about past events"),
        ("r09", 2, 2, "record", "He put a record on the turntable.", "A disc providing an audio recording of past events"),
        ("r10", 2, 2, "record", "The band released its first record in 1967.", "A disc providing an audio recording"),
        ("r11", 2, 2, "record", "She collects old jazz record sleeves.", "A disc providing an audio recording of past events"),
        ("r12", 2, 2, "record", "The record skipped on the second song.", "A vinyl disc holding recorded sound"),
        ("r13", 2, 1, "record", "She broke the world record in the sprint.", "The highest score achieved in a sport"),
        ("r14", 2, 1, "record", "It was a record crowd for the stadium.", "The highest score achieved in a sport"),
        ("r15", 2, 1, "record", "He set a new record for the marathon.", "The best performance ever achieved in a sport"),
        ("r16", 2, 1, "record", "The team equalled the club record.", "The highest score achieved in a game"),
        ("r17", 1, 3, "record", "He has a criminal record.", "A list of crimes committed by a person"),
        ("r18", 1, 3, "record", "A man with a record cannot serve.", "A history of criminal convictions"),
    ]),
    "plane": ("nn", [
        ("p1", 1, 0, "plane", "The plane landed safely in the fog.", "A powered aircraft with fixed wings"),
        ("p2", 2, 0, "plane", "We boarded the plane at noon.", "An aircraft with fixed wings"),
        ("p3", 2, 0, "plane", "The plane circled over the airport.", "A powered flying vehicle with wings"),
        ("p4", 1, 0, "plane", "A small plane crashed near the farm.", "An aeroplane"),
        ("p5", 1, 1, "plane", "The points lie on a single plane.", "A flat two dimensional surface"),
        ("p6", 2, 1, "plane", "Rotate the figure in the horizontal plane.", "A flat surface extending in two dimensions"),
        ("p7", 1, 1, "plane", "The plane of the table was tilted.", "A flat level surface"),
        ("p8", 1, 2, "plane", "The carpenter sharpened his plane.", "A tool for smoothing wood"),
    ]),
}

# (id1, id2, [(annotator, score)])
JUDGMENTS = {
    "word": [
        ("w01", "w02", [("ann1", 4), ("ann2", 4)]),
        ("w01", "w03", [("ann1", 4), ("ann2", 3)]),
        ("w02", "w04", [("ann1", 3), ("ann2", 4)]),
        ("w03", "w04", [("ann1", 4), ("ann2", 4)]),
        ("w05", "w06", [("ann1", 4), ("ann2", 3)]),
        ("w05", "w08", [("ann1", 3), ("ann2", 3)]),
        ("w06", "w07", [("ann1", 4), ("ann2", 0)]),
        ("w07", "w08", [("ann1", 3), ("ann2", 4)]),
        ("w09", "w10", [("ann1", 4), ("ann2", 4)]),
        ("w09", "w11", [("ann1", 4), ("ann2", 4)]),
        ("w10", "w12", [("ann1", 3), ("ann2", 3)]),
        ("w11", "w12", [("ann1", 4), ("ann2", 3)]),
        ("w01", "w05", [("ann1", 2), ("ann2", 1)]),
        ("w02", "w09", [("ann1", 1), ("ann2", 1)]),
        ("w03", "w08", [("ann1", 2), ("ann2", 2)]),
        ("w04", "w12", [("ann1", 1), ("ann2", 2)]),
        ("w06", "w10", [("ann1", 2), ("ann2", 1)]),
        ("w07", "w11", [("ann1", 1), ("ann2", 1)]),
        ("w08", "w13", [("ann1", 0), ("ann2", 0)]),
        ("w12", "w13", [("ann1", 2), ("ann2", 1)]),
        ("w01", "w99", [("ann1", 3)]),
    ],
    "record": [
        ("r01", "r02", [("ann1", 4), ("ann2", 4)]),
        ("r01", "r05", [("ann1", 4), ("ann2", 3)]),
        ("r03", "r06", [("ann1", 4), ("ann2", 4)]),
        ("r04", "r07", [("ann1", 3), ("ann2", 3)]),
        ("r05", "r08", [("ann1", 4), ("ann2", 4)]),
        ("r09", "r10", [("ann1", 4), ("ann2", 4)]),
        ("r11", "r12", [("ann1", 4), ("ann2", 3)]),
        ("r13", "r14", [("ann1", 3), ("ann2", 4)]),
        ("r15", "r16", [("ann1", 4), ("ann2", 4)]),
        ("r02", "r09", [("ann1", 2), ("ann2", 2)]),
        ("r06", "r12", [("ann1", 2), ("ann2", 1)]),
        ("r01", "r13", [("ann1", 1), ("ann2", 1)]),
        ("r10", "r15", [("ann1", 1), ("ann2", 2)]),
        ("r17", "r18", [("ann1", 4), ("ann2", 3)]),
        ("r03", "r17", [("ann1", 2), ("ann2", 3)]),
    ],
    "plane": [
        ("p1", "p2", [("ann1", 4), ("ann2", 4)]),
        ("p1", "p3", [("ann1", 4), ("ann2", 3)]),
        ("p2", "p4", [("ann1", 4), ("ann2", 4)]),
        ("p3", "p4", [("ann1", 3), ("ann2", 4)]),
        ("p5", "p6", [("ann1", 4), ("ann2", 4)]),
        ("p5", "p7", [("ann1", 3), ("ann2", 3)]),
        ("p6", "p7", [("ann1", 4), ("ann2", 3)]),
        ("p1", "p5", [("ann1", 1), ("ann2", 1)]),
        ("p2", "p6", [("ann1", 1), ("ann2", 2)]),
        ("p4", "p8", [("ann1", 1), ("ann2", 1)]),
        ("p7", "p8", [("ann1", 2), ("ann2", 1)]),
        ("p3", "p8", [("ann1", 1), ("ann2", 2)]),
    ],
}


def char_span(context, surface):
    m = re.search(r"\b" + re.escape(surface) + r"\b", context)
    assert m, (context, surface)
    return m.start(), m.end()


def main():
    defs = []
    for lemma, (pos, rows) in LEMMAS.items():
        d = os.path.join(CORPUS, lemma)
        os.makedirs(d, exist_ok=True)
        with open(os.path.join(d, "uses.tsv"), "w", encoding="utf-8", newline="\n") as f:
            f.write("lemma\tpos\tdate\tgrouping\tidentifier\tdescription\tcontext\tindexes_target_token\tindexes_target_sentence\n")
            for uid, grouping, _cluster, surface, context, _defn in rows:
                s, e = char_span(context, surface)
                date = 1840 if grouping == 1 else 1990
                f.write(f"{lemma}\t{pos}\t{date}\t{grouping}\t{uid}\t\t{context}\t{s}:{e}\t0:{len(context)}\n")
        with open(os.path.join(d, "clusters.tsv"), "w", encoding="utf-8", newline="\n") as f:
            f.write("identifier\tcluster\n")
            for uid, _g, cluster, *_ in rows:
                f.write(f"{uid}\t{cluster}\n")
        with open(os.path.join(d, "judgments.tsv"), "w", encoding="utf-8", newline="\n") as f:
            f.write("identifier1\tidentifier2\tannotator\tjudgment\tcomment\tlemma\n")
            for a, b, anns in JUDGMENTS[lemma]:
                for ann, score in anns:
                    f.write(f"{a}\t{b}\t{ann}\t{score}.0\t\t{lemma}\n")
        for uid, _g, _c, _s, _ctx, defn in rows:
            defs.append({"usage_id": uid, "lemma": lemma, "definition": defn, "generator_id": "fixture"})
    with open(os.path.join(CORPUS, "..", "definitions.jsonl"), "w", encoding="utf-8", newline="\n") as f:
        for d in defs:
            f.write(json.dumps(d, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
