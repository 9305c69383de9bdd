from ..batch import map_ordered


def test_map_ordered_inline():
    assert map_ordered(abs, [-3, 1, -2]) == [3, 1, 2]
    assert map_ordered(abs, []) == []


def test_map_ordered_keeps_order_across_processes():
    items = list(range(-40, 40))
    assert map_ordered(abs, items, processes=3) == [abs(item) for item in items]


if __name__ == "__main__":
    test_map_ordered_inline()
    test_map_ordered_keeps_order_across_processes()
    print("============ ALL TESTS PASSED ============")
