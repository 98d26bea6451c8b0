"""printstream：有序输出"""
from printstream import PrintStream, print_stream


def test_lines_keep_order(capsys):
    stream = PrintStream()
    for i in range(200):
        stream.add_to_buffer(f"{i}\n")
    stream.stop()
    assert capsys.readouterr().out == "".join(f"{i}\n" for i in range(200))
    assert stream.queue_length == 0
    assert not stream.is_running


def test_write_now_after_queue(capsys):
    stream = PrintStream()
    stream.add_to_buffer("a")
    stream.write_now("b")
    stream.stop()
    assert capsys.readouterr().out == "ab"


def test_print_stream_flush(capsys):
    print_stream("x", 1, sep="=", flush=True)
    assert capsys.readouterr().out == "x=1\n"
