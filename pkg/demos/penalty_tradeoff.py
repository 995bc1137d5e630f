"""Two chained blocks disagree, 100 against 90; the penalty weights pick the winner."""

from staleflow import FlowFunction, InferenceParams, infer


def main():
    for k_inc, k_dec in ((1, 2), (3, 1), (1, 1)):
        ff = FlowFunction([100, 90], [(0, 1)], [None])
        out = infer(ff, InferenceParams(k_inc=k_inc, k_dec=k_dec))
        print(f"k_inc={k_inc} k_dec={k_dec}: flow={out.vertex_flow} objective={out.objective}")
    print("\nRaising a count is cheaper by default, so both blocks settle on 100.")
    print("With equal weights both answers cost the same and either is optimal.")


if __name__ == "__main__":
    main()
