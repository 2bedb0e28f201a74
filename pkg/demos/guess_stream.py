"""Train a grammar on a toy corpus, then watch hints reorder the guesses.

    python demos/guess_stream.py
"""

from loginaudit.dictgen import adjust_dictionary, generate_guesses, password_probability, train_pcfg

CORPUS = [
    "password1", "summer2020", "dragon12", "monkey123", "shadow99", "qwerty1!",
    "letmein12", "blue2024", "pink1234", "hello123",
]


def main() -> None:
    grammar = train_pcfg(CORPUS)
    print("structures:")
    for structure, p in sorted(grammar.structures.items(), key=lambda kv: -kv[1]):
        print(f"  {structure:<10} {p:.3f}")

    print("\ntop guesses, no hints:")
    for pw, p in generate_guesses(grammar, 8):
        print(f"  {p:.5f}  {pw}")

    print("\nP(monkey123) =", password_probability(grammar, "monkey123"))

    # "acme" could come from a login page title such as "Acme Corp Admin"
    stream = adjust_dictionary(grammar, ["acme"], history={"password1"})
    print("\nwith hint 'acme' (password1 already tried):")
    for pw, p in stream.take(8):
        print(f"  {p:.5f}  {pw}")


if __name__ == "__main__":
    main()
