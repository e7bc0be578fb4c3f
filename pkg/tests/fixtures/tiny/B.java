package tiny.app;

import tiny.core.A;

public class B {
    public void m3() {
        A a = new A();
        a.m1();
    }
}
