from invoke import task as local_task


# suite completa, incluidas las corridas de aceptación marcadas como slow
@local_task
def test(c):
    c.run("pytest tests")


@local_task(name="test-fast")
def test_fast(c):
    c.run('pytest tests -m "not slow"')


@local_task
def verify(c):
    c.run("python main.py verify")
    print("Oráculos exactos verificados correctamente.")


@local_task
def reproduce(c, trials=10000, out="results"):
    c.run(f"python scripts/reproduce_comparison.py --trials {trials} --out {out}")
