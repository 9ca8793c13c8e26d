import pytest


GENDER_FEATS = {"M": "Gender=Masc", "F": "Gender=Fem", "N": "Gender=Neut"}


def conllu_text(sentences):
    """Render [(form, upos, gender-or-None), ...] sentences as CoNLL-U."""
    blocks = []
    for sentence in sentences:
        lines = []
        for idx, (form, upos, gender) in enumerate(sentence, start=1):
            feats = GENDER_FEATS.get(gender, "_")
            lines.append(f"{idx}\t{form}\t_\t{upos}\t_\t{feats}\t_\t_\t_\t_")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


@pytest.fixture
def write(tmp_path):
    def _write(name, content):
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
        return path
    return _write
