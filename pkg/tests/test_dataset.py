import logging

import numpy as np
import pytest

from laryngobench.dataset import (
    BENIGN,
    MALIGNANT,
    LabeledDataset,
    LabelMap,
    PatientRecord,
    RowError,
    SchemaError,
    StratificationError,
    compare_datasets,
    demographic_matrix,
    load_manifest,
    stratified_split,
    summarize,
    write_manifest,
)

SVD_MALIGNANT = {
    "Vocal cord cancer": 22, "Hypopharyngeal tumor": 6, "Larynx tumor": 5, "Epiglottic cancer": 1,
    "Nesopharyngeal tumor": 1, "Carcinoma in situ": 1, "Dysplastic dysphonia": 1, "Dysplastic larynx": 1,
}


def write_csv(path, rows, header="id,audio_path,pathology,sex,age"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return path


def make_ds(n_benign, n_malignant, rng=None):
    rng = rng or np.random.default_rng(0)
    recs = [
        PatientRecord(id=f"p{i}", audio_path=f"{i}.wav", pathology="x", sex=("Male" if i % 2 else "Female"),
                      age=int(rng.integers(20, 90)), label=int(i >= n_benign))
        for i in range(n_benign + n_malignant)
    ]
    return LabeledDataset(tuple(recs))


def test_label_mapping(tmp_path):
    path = write_csv(tmp_path / "m.csv", [
        "a,a.wav,Laryngeal cancer,M,60", "b,b.wav,Dysplasia,F,55", "c,c.wav,Vocal palsy,male,40"])
    lm = LabelMap(frozenset({"Laryngeal cancer", "Dysplasia"}))
    ds = load_manifest(path, lm)
    assert list(ds.labels) == [MALIGNANT, MALIGNANT, BENIGN]
    assert [r.sex for r in ds.records] == ["Male", "Female", "Male"]
    assert list(load_manifest(path, lm).labels) == list(ds.labels)
    assert list(load_manifest(path, LabelMap()).labels) == [BENIGN] * 3


def test_label_map_file(tmp_path):
    p = tmp_path / "labels.txt"
    p.write_text("# comment\n[malignant]\nLaryngeal cancer\nDysplasia\n\n[benign]\nVocal palsy\n")
    assert LabelMap.from_file(p).malignant_names == {"Laryngeal cancer", "Dysplasia"}


def test_svd_style_counts(tmp_path):
    rows, i = [], 0
    for name, count in SVD_MALIGNANT.items():
        for _ in range(count):
            rows.append(f"s{i},s{i}.wav,{name},M,60")
            i += 1
    for _ in range(50):
        rows.append(f"s{i},s{i}.wav,Laryngitis,F,40")
        i += 1
    ds = load_manifest(write_csv(tmp_path / "svd.csv", rows), LabelMap(frozenset(SVD_MALIGNANT)))
    assert int(ds.labels.sum()) == 38


def test_manifest_errors(tmp_path, caplog):
    with pytest.raises(SchemaError, match="'age'"):
        load_manifest(write_csv(tmp_path / "a.csv", ["a,a.wav,x,M"], header="id,audio_path,pathology,sex"), LabelMap())
    with pytest.raises(RowError, match="row 1"):
        load_manifest(write_csv(tmp_path / "b.csv", ["a,a.wav,x,M,40", "b,b.wav,x,F,forty"]), LabelMap())
    with pytest.raises(RowError, match="sex"):
        load_manifest(write_csv(tmp_path / "c.csv", ["a,a.wav,x,X,40"]), LabelMap())
    with caplog.at_level(logging.WARNING):
        ds = load_manifest(write_csv(tmp_path / "d.csv", ["a,a.wav,x,M,16"]), LabelMap())
    assert len(ds) == 1 and "below 18" in caplog.text


def test_symptoms_and_optional_columns(tmp_path):
    path = write_csv(tmp_path / "s.csv", ["a,a.wav,x,M,40,NA,1,1,0", "b,b.wav,y,F,50,2,NA,0,1"],
                     header="id,audio_path,pathology,sex,age,packs_per_day,drinks_per_day,hoarse,cough")
    (tmp_path / "s.schema.yaml").write_text("symptoms: [hoarse, cough]\n")
    ds = load_manifest(path, LabelMap())
    assert ds.symptom_columns == ("hoarse", "cough")
    assert ds.records[0].packs_per_day is None and ds.records[1].packs_per_day == 2
    X, names = demographic_matrix(ds.records, True, ds.symptom_columns)
    assert names == ["age", "sex", "hoarse", "cough", "packs_per_day", "drinks_per_day"]
    assert X.shape == (2, 6) and np.isnan(X[0, 4]) and X[0, 1] == 1.0 and X[1, 1] == 0.0
    out = tmp_path / "copy.csv"
    write_manifest(out, ds)
    again = load_manifest(out, LabelMap())
    assert again.records == ds.records


def test_split_counts_large():
    ds = make_ds(1940, 60)
    train, test = stratified_split(ds, 0.33, seed=1)
    # round(0.33 * 1940) = 640, round(0.33 * 60) = 20
    assert (int((test.labels == 0).sum()), int(test.labels.sum())) == (640, 20)
    assert (int((train.labels == 0).sum()), int(train.labels.sum())) == (1300, 40)


def test_split_partition_and_determinism():
    ds = make_ds(10, 10)
    train, test = stratified_split(ds, 0.5, seed=3)
    assert int(test.labels.sum()) == 5 and int((test.labels == 0).sum()) == 5
    assert sorted(train.ids + test.ids) == sorted(ds.ids)
    assert not set(train.ids) & set(test.ids)
    again = stratified_split(ds, 0.5, seed=3)
    assert again[0].ids == train.ids and again[1].ids == test.ids


@pytest.mark.parametrize("frac", [0.1, 0.33, 0.5, 0.77])
def test_split_per_class_within_one(frac):
    ds = make_ds(83, 17)
    _, test = stratified_split(ds, frac, seed=0)
    assert abs(int(test.labels.sum()) - frac * 17) <= 1
    assert abs(int((test.labels == 0).sum()) - frac * 83) <= 1


def test_split_errors():
    with pytest.raises(StratificationError):
        stratified_split(make_ds(10, 1), 0.3, 0)
    with pytest.raises(ValueError):
        stratified_split(make_ds(10, 10), 1.0, 0)


def test_compare_with_itself():
    ds = make_ds(40, 12)
    rep = compare_datasets(ds, ds)
    for c in ("Benign", "Malignant"):
        assert rep["sex_fisher"][c]["p_value"] == 1.0
        assert rep["age_mwu"][c]["p_value"] >= 0.99


def test_compare_age_shift_and_missing_class():
    def ds_with_age(age, n=20, label=BENIGN):
        return LabeledDataset(tuple(PatientRecord(f"{age}_{i}", "", "x", "Male", age, label) for i in range(n)))
    rep = compare_datasets(ds_with_age(30), ds_with_age(70))
    assert rep["age_mwu"]["Benign"]["p_value"] < 0.001
    assert rep["age_mwu"]["Malignant"]["computable"] is False
    assert rep["duration_mwu"]


def test_summary_counts():
    ds = make_ds(30, 6)
    s = summarize(ds)
    total = sum(v["count"] for cls in s["classes"].values() for v in cls.values())
    assert total == 36
    assert s["prevalence"] == pytest.approx(6 / 36)
