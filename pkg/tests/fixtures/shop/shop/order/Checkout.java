package shop.order;

import shop.cart.Cart;

public class Checkout {
    private final PaymentGateway payments;

    public Checkout(PaymentGateway payments) {
        this.payments = payments;
    }

    public Order placeOrder(Cart cart) {
        Order order = new Order(cart);
        if (payments.charge(order.getTotalCents())) {
            order.markPaid();
        } else {
            order.cancel();
        }
        return order;
    }
}
