import threading
import sys
import atexit
from typing import Optional
from collections import deque


class PrintStream:
    """有序打印流 - 后台线程按入队顺序写出，多线程调用时行不会交叉"""

    def __init__(self):
        # 使用队列保证文本顺序
        self.text_queue = deque()
        self.lock = threading.Lock()
        self.pending = threading.Condition(self.lock)
        self.running = False
        self.output_thread: Optional[threading.Thread] = None

    def start(self):
        """启动打印流系统"""
        with self.lock:
            if self.running:
                return
            self.running = True
            self.output_thread = threading.Thread(target=self._output_processor, daemon=True)
            self.output_thread.start()

    def stop(self, timeout: float = 10.0):
        """输出剩余内容后停止"""
        with self.lock:
            if not self.running:
                return
            self.running = False
            self.pending.notify_all()
        if self.output_thread and self.output_thread.is_alive():
            self.output_thread.join(timeout=timeout)
        self.flush_remaining()

    def add_to_buffer(self, text: str):
        """添加文本到队列"""
        if not self.running:
            self.start()
        with self.lock:
            self.text_queue.append(str(text))
            self.pending.notify()

    def write_now(self, text: str):
        """先清空队列再立即写出，保持先后顺序"""
        with self.lock:
            self._drain()
            self._write(text)

    def flush_remaining(self):
        """立即输出剩余所有内容"""
        with self.lock:
            self._drain()

    @staticmethod
    def _write(text: str):
        # 每次写出时解析 sys.stdout，重定向后的流也能收到
        out = sys.stdout
        out.write(text)
        out.flush()

    def _drain(self):
        while self.text_queue:
            self._write(self.text_queue.popleft())

    def _output_processor(self):
        """输出处理线程"""
        with self.lock:
            while self.running or self.text_queue:
                if not self.text_queue:
                    self.pending.wait(timeout=0.1)
                    continue
                try:
                    self._drain()
                except Exception:
                    # 输出流已关闭时丢弃剩余内容
                    self.text_queue.clear()

    @property
    def is_running(self) -> bool:
        return self.running

    @property
    def queue_length(self) -> int:
        """队列中尚未写出的文本块数量"""
        with self.lock:
            return len(self.text_queue)


_global_print_stream = PrintStream()


def print_stream(*args, sep: str = ' ', end: str = '\n', flush: bool = False) -> None:
    """
    有序打印：结果行 flush=True 立即写出，进度行入队由后台线程写出
    """
    text = sep.join(str(arg) for arg in args) + end
    try:
        if flush:
            _global_print_stream.write_now(text)
        else:
            _global_print_stream.add_to_buffer(text)
    except Exception:
        print(*args, sep=sep, end=end)


def _cleanup():
    try:
        _global_print_stream.stop()
    except Exception:
        pass


atexit.register(_cleanup)

__all__ = ['print_stream', 'PrintStream']
